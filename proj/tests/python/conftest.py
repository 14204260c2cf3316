import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture
def schemas():
    import json

    return {
        kind: json.loads((ROOT / "schemas" / f"{kind}_record.schema.json").read_text())
        for kind in ("sft", "reward")
    }


@pytest.fixture
def job_market():
    return {
        "scenario": "job_market",
        "num_agents": 30,
        "rounds": 3,
        "seed": 4,
        "workers": 4,
        "scenario_params": {"num_postings": 4, "max_capacity": 2},
    }
