import pytest

from codecreativity.client import ProviderConfig, StubChatClient, make_client_factory
from codecreativity.pipeline import (
    AugmentResult,
    augment_dataset,
    compute_human_profiles,
    evaluate_dataset,
    evaluate_instance,
    make_detector,
    problem_seed,
)
from codecreativity.sandbox import ResourceLimits
from codecreativity.types import TestExample
from helpers import make_problem, make_state, techs

LIMITS = ResourceLimits(wall_time_per_test=5.0)

ECHO_REPLY = "```python\ndef solve():\n    print(input())\n```"
DOUBLE_REPLY = "```python\ndef solve():\n    print(2 * int(input()))\n```"
LOOPY_REPLY = (
    "```python\ndef solve():\n    n = int(input())\n    total = 0\n"
    "    for _ in range(n):\n        total += 2\n    print(total // 1 if n else 0)\n```"
)
BOTH = "- for loop\n- if statement"


def double_problem(problem_id="p1"):
    return make_problem(
        problem_id,
        f"A. Doubler {problem_id}\nRead one integer, print twice its value.",
        tests=[TestExample("3\n", "6\n"), TestExample("0\n", "0\n")],
        humans=["def solve():\n    print(2 * int(input()))\n"],
    )


def test_problem_seed_is_stable_and_distinct():
    assert problem_seed(0, "p1") == problem_seed(0, "p1")
    assert problem_seed(0, "p1") != problem_seed(0, "p2")
    assert problem_seed(0, "p1") != problem_seed(1, "p1")


def test_static_detector_swallows_parse_errors():
    detector = make_detector("static")
    assert detector("p1", "def solve():\n    for i in range(3):\n        print(i)\n") \
        == techs("for loop")
    assert detector("p1", "not even python (") == frozenset()


def test_model_detector_maps_empty_reviews_to_empty_set():
    factory = lambda problem_id: StubChatClient(["- clever math"])
    detector = make_detector("model", factory)
    assert detector("p1", "src") == frozenset()


def test_model_detector_requires_a_factory():
    with pytest.raises(ValueError):
        make_detector("model")
    with pytest.raises(ValueError):
        make_detector("quantum")


def test_compute_human_profiles_uses_the_detector():
    problems = [double_problem("p1"), make_problem("p2")]  # p2 has no humans
    profiles = compute_human_profiles(problems, make_detector("static"))
    assert set(profiles) == {"p1"}
    assert profiles["p1"].per_solution == (frozenset(),)  # straight-line human


def test_evaluate_instance_builds_a_correct_record():
    problem = double_problem()
    client = StubChatClient([DOUBLE_REPLY])
    records = evaluate_instance(
        problem, make_state("p1"), client, make_detector("static"), LIMITS)
    (record,) = records
    assert record.correct
    assert record.constraint_free
    assert record.detected == frozenset()
    assert record.group_id is None
    assert record.sample_index == 0


def test_evaluate_instance_flags_wrong_answers():
    problem = double_problem()
    records = evaluate_instance(
        problem, make_state("p1"), StubChatClient([ECHO_REPLY]),
        make_detector("static"), LIMITS)
    assert not records[0].correct


def test_evaluate_instance_records_code_free_replies_as_failures():
    problem = double_problem()
    records = evaluate_instance(
        problem, make_state("p1"), StubChatClient(["no code, sorry"]),
        make_detector("static"), LIMITS)
    (record,) = records
    assert not record.correct
    assert record.solution.error == "no_code_found"
    assert record.detected == frozenset()


def test_evaluate_instance_records_model_errors_as_failures():
    problem = double_problem()
    records = evaluate_instance(
        problem, make_state("p1"), StubChatClient([]),  # exhausts immediately
        make_detector("static"), LIMITS)
    (record,) = records
    assert not record.correct
    assert record.solution.error.startswith("model_error:")


def test_evaluate_instance_k_samples_share_a_group():
    problem = double_problem()
    client = StubChatClient([DOUBLE_REPLY, ECHO_REPLY, LOOPY_REPLY])
    records = evaluate_instance(
        problem, make_state("p1"), client, make_detector("static"), LIMITS, k=3)
    assert [r.sample_index for r in records] == [0, 1, 2]
    assert {r.group_id for r in records} == {"p1@t0"}
    assert [r.correct for r in records] == [True, False, True]


def test_evaluate_dataset_is_deterministic_across_worker_counts():
    problems = [double_problem("p1"), double_problem("p2")]
    states = [make_state("p1"), make_state("p2")]

    def run(workers):
        factory = make_client_factory(
            ProviderConfig(),
            scripts={"default": [DOUBLE_REPLY]},
        )
        return evaluate_dataset(
            problems, states, factory, make_detector("static"),
            limits=LIMITS, workers=workers)

    serial, parallel = run(1), run(4)
    assert serial == parallel
    assert [r.problem_id for r in serial] == ["p1", "p2"]
    assert all(r.correct for r in serial)


def test_evaluate_dataset_filters_states_by_range_and_known_problems():
    problems = [double_problem("p1")]
    states = [
        make_state("p1"),
        make_state("p1", list(techs("for loop"))),
        make_state("ghost"),
    ]
    factory = make_client_factory(
        ProviderConfig(), scripts={"default": [DOUBLE_REPLY]})
    records = evaluate_dataset(
        problems, states, factory, make_detector("static"),
        limits=LIMITS, t_range=(0, 0), workers=1)
    assert [(r.problem_id, r.t) for r in records] == [("p1", 0)]


def test_augment_dataset_collects_traces_and_failures():
    problems = [double_problem("p1"), double_problem("p2")]
    scripts = {
        "problems": {
            "p1": [DOUBLE_REPLY, BOTH, DOUBLE_REPLY, BOTH],
            "p2": [DOUBLE_REPLY],  # dies during its first review
        },
    }
    factory = make_client_factory(ProviderConfig(), scripts=scripts)
    result = augment_dataset(problems, factory, max_t=2, seed=0, workers=2)
    assert [trace.problem_id for trace in result.traces] == ["p1"]
    assert set(result.failures) == {"p2"}
    assert result.partial_traces["p2"].iterations == ()
    states = result.states_by_problem["p1"]
    assert [(s.t, len(s.constraints)) for s in states] == [(0, 0), (1, 1), (2, 2)]


def test_augment_dataset_is_deterministic_across_worker_counts():
    problems = [double_problem(f"p{i}") for i in range(3)]
    scripts = {"default": [DOUBLE_REPLY, BOTH, DOUBLE_REPLY, BOTH]}

    def run(workers):
        factory = make_client_factory(ProviderConfig(), scripts=scripts)
        result = augment_dataset(problems, factory, max_t=2, seed=9,
                                 workers=workers)
        return [(t.problem_id, t.iterations) for t in result.traces]

    assert run(1) == run(3)


def test_augment_result_default_shapes():
    result = AugmentResult()
    assert result.traces == []
    assert result.failures == {}
