from __future__ import annotations

import pytest

from golden import COOKIES_ANSWER, COOKIES_COT, COOKIES_EQN, COOKIES_QUESTION, COOKIES_TREE
from mint.dataset import ProblemRecord
from mint.views import COT_CLEAN, EQN, TREE


@pytest.fixture
def cookies_record() -> ProblemRecord:
    return ProblemRecord(
        id="cookies-1",
        dataset="demo",
        language="en",
        question=COOKIES_QUESTION,
        gold_answer=COOKIES_ANSWER,
        solutions={COT_CLEAN: COOKIES_COT},
    )


@pytest.fixture
def cookies_full_record() -> ProblemRecord:
    return ProblemRecord(
        id="cookies-1",
        dataset="demo",
        language="en",
        question=COOKIES_QUESTION,
        gold_answer=COOKIES_ANSWER,
        solutions={COT_CLEAN: COOKIES_COT, EQN: COOKIES_EQN, TREE: COOKIES_TREE},
    )
