import json

import httpx
import pytest

from mrbt.genpipeline import (
    ChatGenerator, GeneratorError, MrbtSpecFile, ScriptedGenerator, read_spec, reference_spec, run_pipeline,
    write_spec,
)
from mrbt.genpipeline.generators import Expected, GeneratorRequest, extract_block, fence
from mrbt.genpipeline.pipeline import build_debug_prompt, system_prompt
from mrbt.gridworld.spaces import REFERENCE_SUBTASKS
from mrbt.template import RewardConfig
from mrbt.verifier import Spec, VerifyConfig

CFG = VerifyConfig(horizon=12)
BUGGY_DOOR = "door_state[yellow] == OPEN"


def test_spec_roundtrip(tmp_path, lockedroom_mini):
    spec = reference_spec(lockedroom_mini)
    spec.rewards = RewardConfig(nav_reward=0.2)
    p = write_spec(tmp_path / "s.yaml", spec)
    back = read_spec(p)
    assert back == spec
    subs = back.to_subtasks(lockedroom_mini)
    assert len(subs) == back.k == 4
    again = MrbtSpecFile.from_subtasks("lockedroom", subs, lockedroom_mini.schema, back.rewards)
    assert [e.psi for e in again.subtasks] == [e.psi for e in spec.subtasks]


def test_malformed_spec(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("task_space: doorkey\nsubtasks:\n  - name: x\n")
    with pytest.raises(ValueError):
        read_spec(p)
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError):
        read_spec(p)


def test_extract_block():
    text = "thinking...\n```mrbt\nfirst\n```\nthen\n```mrbt\n  second  \n```"
    assert extract_block(text) == "second"
    assert extract_block(fence("x == 1")) == "x == 1"
    with pytest.raises(ValueError):
        extract_block("```python\nx\n```")


def test_scripted_generator_queue():
    g = ScriptedGenerator({"psi1": ["a", "b"]})
    req = GeneratorRequest("sys", [], Expected("psi", 1))
    assert [g.complete(req) for _ in range(3)] == ["a", "b", "b"]
    assert g.calls == ["psi1"] * 3
    with pytest.raises(GeneratorError):
        g.complete(GeneratorRequest("sys", [], Expected("phi", 1)))


def test_scripted_generator_from_file(tmp_path):
    p = tmp_path / "g.yaml"
    p.write_text("id: demo\nresponses:\n  subtasks: ['```mrbt\n[a]\n```']\n")
    g = ScriptedGenerator.from_file(p)
    assert g.id == "demo"
    p.write_text("- nope\n")
    with pytest.raises(ValueError):
        ScriptedGenerator.from_file(p)


def test_chat_generator_request_shape():
    seen = {}

    def handler(request: httpx.Request):
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json={"choices": [{"message": {"content": fence("true")}}]})

    g = ChatGenerator(endpoint="http://llm.test/v1/chat/completions", api_key="k", model="m",
                      transport=httpx.MockTransport(handler))
    out = g.complete(GeneratorRequest("SYS", [{"role": "user", "content": "hi"}], Expected("psi", 1)))
    assert extract_block(out) == "true"
    assert seen["auth"] == "Bearer k"
    assert seen["body"]["model"] == "m"
    assert seen["body"]["messages"][0] == {"role": "system", "content": "SYS"}
    assert g.id == "chat:m"


def test_chat_generator_errors(monkeypatch):
    monkeypatch.delenv("MRBT_LLM_ENDPOINT", raising=False)
    with pytest.raises(GeneratorError):
        ChatGenerator()
    g = ChatGenerator(endpoint="http://llm.test", transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    with pytest.raises(GeneratorError):
        g.complete(GeneratorRequest("s", [], Expected("psi", 1)))
    g = ChatGenerator(endpoint="http://llm.test",
                      transport=httpx.MockTransport(lambda r: httpx.Response(200, json={"x": 1})))
    with pytest.raises(GeneratorError):
        g.complete(GeneratorRequest("s", [], Expected("psi", 1)))


def test_chat_generator_env(monkeypatch):
    monkeypatch.setenv("MRBT_LLM_ENDPOINT", "http://e")
    monkeypatch.setenv("MRBT_LLM_MODEL", "mm")
    assert ChatGenerator().id == "chat:mm"


def test_system_prompt_lists_schema(lockedroom_mini):
    text = system_prompt(lockedroom_mini)
    for word in ("door_state[colour]", "keyroom_color", "toggle", "manhattan"):
        assert word in text


def test_pipeline_converges_first_try(doorkey6):
    gen = ScriptedGenerator.from_entries(REFERENCE_SUBTASKS["doorkey"])
    res = run_pipeline(doorkey6, gen, CFG)
    assert res.verified and res.iterations == 1
    assert res.spec.provenance == {"generator": "scripted", "iterations": 1, "verified": True}
    spec, verdicts = res
    assert len(verdicts) == 15


def test_pipeline_refines_only_failing_formula(doorkey6):
    good = REFERENCE_SUBTASKS["doorkey"][1]["psi"]
    gen = ScriptedGenerator.from_entries(REFERENCE_SUBTASKS["doorkey"], {"psi2": [BUGGY_DOOR, good]})
    res = run_pipeline(doorkey6, gen, CFG)
    assert res.verified and res.iterations == 2
    assert gen.calls.count("psi2") == 2
    assert gen.calls.count("psi1") == gen.calls.count("phi2") == 1
    assert res.spec.subtasks[1].psi == good
    assert res.history[0].startswith("iteration 1:") and "passed" in res.history[0]


def test_debug_prompt_names_subtask_and_formula(doorkey6):
    gen = ScriptedGenerator.from_entries(REFERENCE_SUBTASKS["doorkey"], {"psi2": [BUGGY_DOOR]})
    res = run_pipeline(doorkey6, gen, CFG, max_iters=1)
    assert not res.verified
    bad = [v for v in res.verdicts if not v.passed]
    assert bad[0].spec is Spec.COMPOSITION_PERSISTENCE and bad[0].subtask_index == 2
    prompt = build_debug_prompt(bad[0], res.spec)
    assert "subtask 2" in prompt and BUGGY_DOOR in prompt and "psi2" in prompt
    assert "Counterexample trajectory" in prompt
    assert res.spec.provenance["verified"] is False


def test_parse_error_costs_an_iteration(doorkey6):
    good = REFERENCE_SUBTASKS["doorkey"][0]["phi"]
    gen = ScriptedGenerator.from_entries(REFERENCE_SUBTASKS["doorkey"], {"phi1": ["front_pos === key", good]})
    res = run_pipeline(doorkey6, gen, CFG)
    assert res.verified and res.iterations == 2
    assert "could not parse phi1" in res.history[0]


def test_pipeline_gives_up(doorkey6):
    gen = ScriptedGenerator.from_entries(REFERENCE_SUBTASKS["doorkey"], {"psi2": [BUGGY_DOOR]})
    res = run_pipeline(doorkey6, gen, CFG, max_iters=3)
    assert not res.verified and res.iterations == 3
    with pytest.raises(ValueError):
        run_pipeline(doorkey6, gen, CFG, max_iters=0)


def test_bad_masks_rejected(doorkey6):
    gen = ScriptedGenerator.from_entries(REFERENCE_SUBTASKS["doorkey"], {"masks1": ["{nav: [fly], interact: [pickup]}"]})
    res = run_pipeline(doorkey6, gen, CFG, max_iters=2)
    assert not res.verified and res.spec is None
    assert all("could not parse masks1" in h for h in res.history)


def test_system_prompt_grammar_uses_parser_tokens(doorkey6):
    text = system_prompt(doorkey6)
    assert "'->'" in text and "'=>'" not in text
    doorkey6.parse("key_pos[yellow] == -1 -> front_pos != (-1, -1)")
