import csv

import numpy as np
import pytest

from clmkit.data import ColumnSchema, table_from_columns
from clmkit.simulate import SimConfig, simulate_responses

LEVELS = ("Absolutely consent", "Rather consent", "Unsure", "Rather not consent", "Absolutely not consent")
STUDIES = ("Observational", "RCT", "Pharma")
SEXES = ("Female", "Male")


def consent_shaped(seed=0, n=318, n_missing_age=0, theta=(0.3, 1.0, 1.7, 2.4), beta=(2.2, 2.8, -0.5, -0.037)):
    """Synthetic data with the columns and level structure of the consent survey."""
    rng = np.random.default_rng(seed)
    study = rng.choice(STUDIES, n)
    sex = rng.choice(SEXES, n)
    age = np.round(rng.normal(42, 8, n))
    X = np.column_stack([study == "RCT", study == "Pharma", sex == "Male", age]).astype(float)
    y = simulate_responses(SimConfig(theta=theta, beta=beta, seed=seed), X)
    ages = [float(a) for a in age]
    for i in rng.choice(n, n_missing_age, replace=False):
        ages[i] = None
    schema = [
        ColumnSchema("id", "group"),
        ColumnSchema("wave", "numeric"),
        ColumnSchema("study", "categorical", STUDIES),
        ColumnSchema("sex", "categorical", SEXES),
        ColumnSchema("partner_age", "numeric"),
        ColumnSchema("age", "numeric"),
        ColumnSchema("education", "categorical", ("low", "mid", "high")),
        ColumnSchema("response", "ordinal", LEVELS),
    ]
    data = {
        "id": [f"s{i // 3}" for i in range(n)],
        "wave": [float(i % 3 + 1) for i in range(n)],
        "study": list(study),
        "sex": list(sex),
        "partner_age": ages,
        "age": [float(a) for a in rng.integers(18, 80, n)],
        "education": list(rng.choice(["low", "mid", "high"], n)),
        "response": [LEVELS[k - 1] for k in y],
    }
    return schema, data, table_from_columns(schema, data)


def write_table_csv(path, schema, data):
    n = len(next(iter(data.values())))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([s.name for s in schema])
        for i in range(n):
            w.writerow(["" if data[s.name][i] is None else data[s.name][i] for s in schema])


@pytest.fixture(scope="session")
def consent_table():
    return consent_shaped(seed=1, n_missing_age=12)


def synthetic_xy(seed, n=200, p=2, theta=(-1.0, 0.0, 1.0), beta=None, link="logit"):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    beta = tuple(rng.normal(0, 0.7, p)) if beta is None else tuple(beta)
    y = simulate_responses(SimConfig(theta=tuple(theta), beta=beta, link=link, seed=seed), X)
    return X, y, beta


# acceptance criteria record (number, title, passed, detail) here
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {k:>2}. {title}: {detail}")
