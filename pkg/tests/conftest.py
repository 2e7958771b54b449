import csv
import random

import pytest

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def record_criterion(number: int, name: str, passed: bool | None, detail: str = "") -> None:
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
    _ACCEPTANCE[number] = (status, name, detail)
    print(f"[criterion {number:2d}] {status} {name}: {detail}")


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        status, name, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"{n:2d} {status:4s} {name}: {detail}")


SPAM_WORDS = "win free prize cash click offer now claim urgent money".split()
HAM_WORDS = "meeting lunch tomorrow project call home family weekend report office".split()
FILLER = "the a to and you is for on it with this that".split()


def write_text_corpus(path, n_rows=300, seed=0, encoding="utf-8"):
    rng = random.Random(seed)
    with open(path, "w", newline="", encoding=encoding) as fh:
        w = csv.writer(fh)
        w.writerow(["text", "label"])
        for _ in range(n_rows):
            spam = rng.random() < 0.3
            words = (rng.choices(FILLER, k=5) + rng.choices(SPAM_WORDS if spam else HAM_WORDS, k=3)
                     + rng.choices(SPAM_WORDS + HAM_WORDS, k=1))
            rng.shuffle(words)
            w.writerow([" ".join(words), "Spam" if spam else "Ham"])
    return path


@pytest.fixture
def text_csv(tmp_path):
    return write_text_corpus(tmp_path / "corpus.csv")
