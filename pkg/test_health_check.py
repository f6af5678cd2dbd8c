#!/usr/bin/env python3
"""
Tests for the self-diagnostics
"""

import sys

from health_check import CheckStatus, GilbertLabHealthCheck


def test_individual_checks_are_healthy():
    checker = GilbertLabHealthCheck(seed=1, oracle_instances=10, bezout_pairs=5)
    for name in ('modules', 'fixed_point', 'polytropes', 'witness', 'euler'):
        result = checker.component_methods()[name]()
        assert result.status == CheckStatus.HEALTHY, f"{name}: {result.message}"


def test_comprehensive_report_shape():
    report = GilbertLabHealthCheck(seed=2, oracle_instances=5, bezout_pairs=3).run_comprehensive_check()
    assert report['summary']['total_checks'] == 7
    assert report['overall_status'] in ('healthy', 'warning')
    assert report['summary']['critical'] == 0
    assert {c['component'] for c in report['checks']} >= {'fixed_point', 'simulator_oracle', 'bezout'}


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith('test_') and callable(v)]
    failed = 0
    print("🔬 Testing the health check")
    print("=" * 60)
    for test in tests:
        try:
            test()
            print(f"✅ {test.__name__}")
        except Exception as e:
            failed += 1
            print(f"❌ {test.__name__}: {e}")
    print("=" * 60)
    print(f"{len(tests) - failed}/{len(tests)} passed")
    sys.exit(1 if failed else 0)
