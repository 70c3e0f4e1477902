from datetime import datetime, timezone

import numpy as np
import pytest

from memptec.catalog import catalog
from memptec.dataset import SynthSpec, synthesize
from memptec.features import FeatureMatrix, extract_matrix
from memptec.fixtures import axios_document
from memptec.pmi import parse_document

AXIOS_REFERENCE = datetime(2023, 5, 20, tzinfo=timezone.utc)


@pytest.fixture(scope="session")
def axios_pmi():
    return parse_document(axios_document())


@pytest.fixture(scope="session")
def small_synth():
    spec = SynthSpec(n_malicious=100, n_benign=100, seed=11)
    return spec, synthesize(spec)


@pytest.fixture(scope="session")
def small_matrix(small_synth) -> FeatureMatrix:
    spec, corpus = small_synth
    return extract_matrix(corpus, catalog(), spec.reference_time)


def toy_matrix(X, y, names=None) -> FeatureMatrix:
    """Feature matrix over the first columns of the canonical catalog (or ``names``)."""
    from memptec.catalog import FeatureCatalog

    X = np.asarray(X, dtype=float)
    full = catalog()
    names = names or full.names[: X.shape[1]]
    return FeatureMatrix(X, np.asarray(y), FeatureCatalog(full.descriptor(n) for n in names))


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, title: str, ok: bool, detail: str = ""):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
