"""Python front end for the gensim simulation engine."""

import json

from . import _gensim
from ._gensim import (
    BackendError,
    ConflictError,
    GensimError,
    NotFoundError,
    Service,
    ValidationError,
    trigger_external_finetune,
    validate_dataset,
)

__all__ = [
    "BackendError",
    "ConflictError",
    "FeedbackStore",
    "GensimError",
    "NotFoundError",
    "Service",
    "Simulation",
    "ValidationError",
    "fluctuation",
    "oracle_label",
    "run_fluctuation_experiment",
    "run_scaling_benchmark",
    "trigger_external_finetune",
    "validate_dataset",
]


class Simulation:
    def __init__(self, config=None, *, _native=None):
        self._sim = _native if _native is not None else _gensim.Simulation(json.dumps(config or {}))

    @classmethod
    def restore(cls, path, event_log=None):
        return cls(_native=_gensim.Simulation.restore(str(path), event_log))

    @property
    def config(self):
        return json.loads(self._sim.config_json())

    @property
    def current_round(self):
        return self._sim.current_round

    @property
    def finished(self):
        return self._sim.finished

    def __len__(self):
        return self._sim.agent_count

    def run_round(self):
        return json.loads(self._sim.run_round())

    def run(self, rounds=None):
        return json.loads(self._sim.run(rounds))

    def events(self, after=0, limit=0):
        return json.loads(self._sim.events_json(after, limit))

    def checkpoint(self, path):
        self._sim.checkpoint(str(path))

    def intervene(self, intervention):
        self._sim.submit_intervention(json.dumps(intervention))

    def interview(self, agent_id, question):
        return json.loads(self._sim.interview(agent_id, question))

    def search(self, query=""):
        return json.loads(self._sim.search(query))


class FeedbackStore(_gensim.FeedbackStore):
    def add_score(self, sim, event_seq, s):
        super().add_score(sim._sim, event_seq, s)

    def add_revision(self, sim, event_seq, a_prime):
        super().add_revision(sim._sim, event_seq, a_prime)

    def export_sft(self, path):
        return super().export_sft(str(path))

    def export_reward(self, path):
        return super().export_reward(str(path))


def oracle_label(sim, store, sample=100, revise_below=5.0):
    """Scores a simulation's events with the rule-based judge and revises low scorers."""
    return json.loads(_gensim.oracle_label(sim._sim, store, sample, revise_below))


def fluctuation(distributions):
    return json.loads(_gensim.fluctuation([list(d) for d in distributions]))


def run_fluctuation_experiment(config=None):
    return json.loads(_gensim.run_fluctuation_experiment(json.dumps(config or {})))


def run_scaling_benchmark(config=None):
    return json.loads(_gensim.run_scaling_benchmark(json.dumps(config or {})))
