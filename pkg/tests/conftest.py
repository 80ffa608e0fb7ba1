import pytest
from hypothesis import settings

from dstr.pipeline import PipelineConfig, extract_all
from dstr.synth import benchmark_script, synth_generate

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def benchmark():
    return synth_generate(benchmark_script(), seed=0)


@pytest.fixture(scope="session")
def benchmark_features(benchmark):
    return extract_all(benchmark.videos, PipelineConfig())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
