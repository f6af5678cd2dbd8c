"""
GilbertLab Health Check System
Fast self-diagnostics of the fixed-point solver, quadrature, tropical kernel, simulator and mosaic
"""

import json
import math
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Optional

from geom import Rectangle
from limits import (
    TROPICAL_MU, TROPICAL_MU_DIAG, polytrope_constraints, polytrope_densities_integral, solve_wstar,
)
from mosaic import build_mosaic
from motorsim import SimOptions, event_signature, non_monotonicity_witness, random_motorcycles, simulate, \
    simulate_bruteforce
from procs import make_rng, sample_sites, tropical_lines_spec
from tropical import DegeneracyError, curve, random_standard_poly, stable_intersection


class CheckStatus(Enum):
    HEALTHY = "healthy"
    WARNING = "warning"
    CRITICAL = "critical"


@dataclass
class CheckResult:
    component: str
    status: CheckStatus
    message: str
    elapsed_ms: float
    details: Optional[Dict] = None


class GilbertLabHealthCheck:
    """Battery of consistency checks with exactly known answers"""

    def __init__(self, seed: int = 0, oracle_instances: int = 50, bezout_pairs: int = 20):
        self.seed = seed
        self.oracle_instances = oracle_instances
        self.bezout_pairs = bezout_pairs
        self.results: List[CheckResult] = []
        self.start_time = None

    def check_core_modules(self) -> CheckResult:
        """Check that every toolkit module imports"""
        start_time = time.time()
        modules_to_check = ['geom', 'procs', 'motorsim', 'mosaic', 'limits', 'tropical', 'reports', 'run_config']
        failed_imports = []
        for module_name in modules_to_check:
            try:
                __import__(module_name)
            except Exception as e:
                failed_imports.append(f"{module_name}: {str(e)}")
        elapsed = (time.time() - start_time) * 1000
        if failed_imports:
            return CheckResult("core_modules", CheckStatus.CRITICAL,
                               f"Some modules failed to import: {len(failed_imports)}/{len(modules_to_check)}",
                               elapsed, {'failed_imports': failed_imports})
        return CheckResult("core_modules", CheckStatus.HEALTHY, "All core modules imported successfully", elapsed,
                           {'total_modules': len(modules_to_check)})

    def check_fixed_point_constants(self) -> CheckResult:
        """Tropical-line solver output against the closed forms"""
        start_time = time.time()
        w = solve_wstar(tropical_lines_spec(1.0))
        errors = {
            'east': abs(w[0.0] - TROPICAL_MU),
            'north': abs(w[math.pi / 2.0] - TROPICAL_MU),
            'southwest': abs(w[5.0 * math.pi / 4.0] - TROPICAL_MU_DIAG),
        }
        elapsed = (time.time() - start_time) * 1000
        worst = max(errors.values())
        status = CheckStatus.HEALTHY if worst < 1e-9 else CheckStatus.CRITICAL
        return CheckResult("fixed_point", status, f"Largest deviation from closed form {worst:.2e}", elapsed, errors)

    def check_polytrope_constraints(self) -> CheckResult:
        start_time = time.time()
        dens = polytrope_densities_integral()
        total, weighted = polytrope_constraints(TROPICAL_MU, TROPICAL_MU_DIAG)
        residuals = {'sum': abs(dens.total - total), 'weighted_sum': abs(dens.weighted_total - weighted)}
        elapsed = (time.time() - start_time) * 1000
        worst = max(residuals.values())
        status = CheckStatus.HEALTHY if worst < 1e-9 else CheckStatus.CRITICAL
        return CheckResult("polytrope_constraints", status, f"Constraint residual {worst:.2e}", elapsed,
                           dict(residuals, **{f"p{i}": v for i, v in dens.p.items()}))

    def check_bezout(self) -> CheckResult:
        """Stable intersection multiplicities of random curve pairs sum to d1 * d2"""
        start_time = time.time()
        rng = make_rng(self.seed)
        failures = []
        degenerate = 0
        for n in range(self.bezout_pairs):
            d1, d2 = (int(v) for v in rng.integers(1, 5, 2))
            c1 = curve(random_standard_poly(rng, d1))
            c2 = curve(random_standard_poly(rng, d2))
            try:
                total = sum(m for _, m in stable_intersection(c1, c2, seed=n))
            except DegeneracyError:
                degenerate += 1
                continue
            if total != d1 * d2:
                failures.append({'pair': n, 'degrees': (d1, d2), 'total': total})
        elapsed = (time.time() - start_time) * 1000
        if failures:
            return CheckResult("bezout", CheckStatus.CRITICAL, f"{len(failures)} pairs violate d1*d2", elapsed,
                               {'failures': failures[:5]})
        if degenerate:
            return CheckResult("bezout", CheckStatus.WARNING, f"{degenerate} pairs stayed degenerate", elapsed)
        return CheckResult("bezout", CheckStatus.HEALTHY, f"{self.bezout_pairs} random pairs satisfy d1*d2", elapsed)

    def check_simulator_oracle(self) -> CheckResult:
        """Event-driven simulator against the brute-force fixed point on small instances"""
        start_time = time.time()
        rng = make_rng(self.seed + 1)
        box = Rectangle(0.0, 0.0, 10.0, 10.0)
        horizon = box.expand(5.0)
        mismatches = []
        for n in range(self.oracle_instances):
            count = int(rng.integers(2, 13))
            k = int(rng.integers(1, 4))
            motorcycles = random_motorcycles(rng, count, k, box)
            fast = simulate(motorcycles, k, opts=SimOptions(horizon=horizon))
            slow = simulate_bruteforce(motorcycles, k, horizon)
            if event_signature(fast.events) != event_signature(slow):
                mismatches.append({'instance': n, 'motorcycles': count, 'k': k})
        elapsed = (time.time() - start_time) * 1000
        if mismatches:
            return CheckResult("simulator_oracle", CheckStatus.CRITICAL,
                               f"{len(mismatches)} of {self.oracle_instances} instances disagree", elapsed,
                               {'mismatches': mismatches[:5]})
        return CheckResult("simulator_oracle", CheckStatus.HEALTHY,
                           f"{self.oracle_instances} random instances agree with the oracle", elapsed)

    def check_non_monotonicity(self) -> CheckResult:
        start_time = time.time()
        witness = non_monotonicity_witness()
        membership = {k: witness.membership(k) for k in (1, 2, 3)}
        elapsed = (time.time() - start_time) * 1000
        expected = {1: True, 2: False, 3: True}
        status = CheckStatus.HEALTHY if membership == expected else CheckStatus.CRITICAL
        return CheckResult("non_monotonicity", status, f"Membership of the witness point by k: {membership}",
                           elapsed, {str(k): v for k, v in membership.items()})

    def check_euler_identity(self) -> CheckResult:
        """V - E + F_bounded equals the component count on a small tropical-line mosaic"""
        start_time = time.time()
        box = Rectangle(0.0, 0.0, 8.0, 8.0)
        sites = sample_sites(tropical_lines_spec(1.0), box, self.seed)
        result = simulate(sites, 2, opts=SimOptions(horizon=box))
        g = build_mosaic(result)
        elapsed = (time.time() - start_time) * 1000
        details = {'vertices': len(g.vertices), 'edges': len(g.edges), 'faces': len(g.faces),
                   'components': g.components}
        if g.euler_characteristic != g.components:
            return CheckResult("euler_identity", CheckStatus.CRITICAL,
                               f"V - E + F = {g.euler_characteristic} but {g.components} components", elapsed, details)
        if g.degree_sum() != 2 * len(g.edges):
            return CheckResult("euler_identity", CheckStatus.CRITICAL, "Degree sum differs from twice the edge count",
                               elapsed, details)
        return CheckResult("euler_identity", CheckStatus.HEALTHY, "Euler identity and handshake lemma hold", elapsed,
                           details)

    def component_methods(self) -> Dict[str, Any]:
        return {
            'modules': self.check_core_modules,
            'fixed_point': self.check_fixed_point_constants,
            'polytropes': self.check_polytrope_constraints,
            'bezout': self.check_bezout,
            'oracle': self.check_simulator_oracle,
            'witness': self.check_non_monotonicity,
            'euler': self.check_euler_identity,
        }

    def run_comprehensive_check(self) -> Dict[str, Any]:
        """Run all checks and return the overall report"""
        self.start_time = time.time()
        self.results = []

        for name, check_function in self.component_methods().items():
            try:
                self.results.append(check_function())
            except Exception as e:
                self.results.append(CheckResult(name, CheckStatus.CRITICAL, f"Check failed: {str(e)}", 0.0))

        status_counts = {status: 0 for status in CheckStatus}
        for result in self.results:
            status_counts[result.status] += 1
        if status_counts[CheckStatus.CRITICAL] > 0:
            overall_status = CheckStatus.CRITICAL
        elif status_counts[CheckStatus.WARNING] > 0:
            overall_status = CheckStatus.WARNING
        else:
            overall_status = CheckStatus.HEALTHY

        total_time = (time.time() - self.start_time) * 1000
        return {
            'overall_status': overall_status.value,
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'total_check_time_ms': round(total_time, 2),
            'summary': {
                'total_checks': len(self.results),
                'healthy': status_counts[CheckStatus.HEALTHY],
                'warnings': status_counts[CheckStatus.WARNING],
                'critical': status_counts[CheckStatus.CRITICAL],
            },
            'checks': [dict(asdict(r), status=r.status.value) for r in self.results],
        }


def print_report(report: Dict[str, Any]) -> None:
    print("🔬 GilbertLab Health Check Report")
    print("=" * 40)
    print(f"Overall Status: {report['overall_status'].upper()}")
    print(f"Check Time: {report['total_check_time_ms']:.2f}ms")
    print()
    for check in report['checks']:
        status_emoji = {'healthy': '✅', 'warning': '⚠️', 'critical': '❌'}.get(check['status'], '❓')
        print(f"{status_emoji} {check['component']}: {check['message']}")


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description='GilbertLab Health Check')
    parser.add_argument('--component', help='Check specific component only')
    parser.add_argument('--json', action='store_true', help='Output as JSON')
    args = parser.parse_args()

    checker = GilbertLabHealthCheck()
    if args.component:
        methods = checker.component_methods()
        if args.component not in methods:
            print(f"Unknown component: {args.component}")
            print(f"Available components: {', '.join(methods)}")
        else:
            result = methods[args.component]()
            if args.json:
                print(json.dumps(dict(asdict(result), status=result.status.value), indent=2, default=str))
            else:
                print(f"Component: {result.component}")
                print(f"Status: {result.status.value}")
                print(f"Message: {result.message}")
                print(f"Elapsed: {result.elapsed_ms:.2f}ms")
    else:
        report = checker.run_comprehensive_check()
        if args.json:
            print(json.dumps(report, indent=2, default=str))
        else:
            print_report(report)
