#!/usr/bin/env python3
"""
Tests for configuration resolution and run manifests
"""

import json
import os
import sys
import tempfile

from run_config import ConfigError, RunConfig, RunManifest, read_config_file, resolve_config, sha256_of


def _config_file(text: str) -> str:
    path = os.path.join(tempfile.mkdtemp(), 'run.env')
    with open(path, 'w') as f:
        f.write(text)
    return path


def test_flags_override_config_file():
    path = _config_file("k=3\nwindow=2.5\nlambda=4\nks=1,2,8\n")
    config = resolve_config('simulate', {'k': 5, 'window': None}, path)
    assert config.k == 5
    assert config.window == 2.5
    assert config.lam == 4.0
    assert config.k_list == [1, 2, 8]
    assert config.command == 'simulate'


def test_unknown_and_malformed_keys():
    for text in ("colour=blue\n", "k=three\n", "command=limit\n"):
        try:
            read_config_file(_config_file(text))
        except ConfigError:
            continue
        assert False, f"expected ConfigError for {text!r}"
    try:
        read_config_file('/nonexistent/run.env')
    except ConfigError:
        return
    assert False, "expected ConfigError for a missing file"


def test_environment_thread_default():
    previous = os.environ.get('GILBERTLAB_THREADS')
    os.environ['GILBERTLAB_THREADS'] = '3'
    try:
        assert resolve_config('converge', {}).threads == 3
        assert resolve_config('converge', {'threads': 2}).threads == 2
        os.environ['GILBERTLAB_THREADS'] = 'many'
        try:
            resolve_config('converge', {})
        except ConfigError:
            pass
        else:
            assert False, "expected ConfigError"
    finally:
        if previous is None:
            os.environ.pop('GILBERTLAB_THREADS', None)
        else:
            os.environ['GILBERTLAB_THREADS'] = previous


def test_run_config_validation():
    bad = [{'model': 'hexagonal'}, {'k': 0}, {'replicates': 0}, {'seed': -1}, {'window': 0.0}, {'lam': -2.0}]
    for kwargs in bad:
        try:
            RunConfig(**kwargs)
        except ConfigError:
            continue
        assert False, f"expected ConfigError for {kwargs}"


def test_manifest_lists_artifacts_with_hashes():
    out = tempfile.mkdtemp()
    config = RunConfig(command='limit', lam=1.0, output_dir=out)
    manifest = RunManifest(config)
    path = manifest.write_text('limit.txt', 'w = 1\n')
    target = manifest.write()
    with open(target) as f:
        data = json.load(f)
    assert data['config']['lam'] == 1.0
    assert data['config']['command'] == 'limit'
    assert data['artifacts'] == [{'path': 'limit.txt', 'sha256': sha256_of(path)}]


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith('test_') and callable(v)]
    failed = 0
    print("🔬 Testing run configuration")
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
