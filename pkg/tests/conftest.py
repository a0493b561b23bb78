from pathlib import Path

import numpy as np
import pytest

from src.models.environment import Environment, QuestionSpec

FIXTURES = Path(__file__).parent / "fixtures"
REPO_ROOT = Path(__file__).parent.parent


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def bandit() -> Environment:
    """Bandido de 2 acciones, la acción 0 resuelve"""
    return Environment(kind="flat", num_actions=2, questions=[QuestionSpec(solution=[0])])


@pytest.fixture
def chain_env() -> Environment:
    return Environment(
        kind="chain",
        num_actions=4,
        depth=2,
        questions=[
            QuestionSpec(steps=[[0], [1]], solution_logit=0.5),
            QuestionSpec(steps=[[2], [3]], solution_logit=-0.5),
        ],
    )


@pytest.fixture
def toy_config_path() -> Path:
    return REPO_ROOT / "configs" / "questa_toy.yaml"


@pytest.fixture
def repo_root() -> Path:
    return REPO_ROOT
