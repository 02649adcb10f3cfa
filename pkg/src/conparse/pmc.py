"""Parsing with multi-agent collaboration: a parser agent refines its tree
using feedback from a validity checker and a faithfulness checker.

One session is strictly sequential. The first round embeds empty feedback so
the prompt shape is identical across rounds; later rounds embed the previous
output and both feedback reports. The loop stops on the first clean round or
at the round budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .backend import BackendError, CompletionBackend, CompletionRequest
from .faithfulness import FaithfulnessReport, check_faithfulness
from .linearize import Strategy
from .prompting import (
    build_checker_prompt,
    default_instruction,
    default_task_introduction,
    load_template,
    render_template,
)
from .tree import ConstituencyTree, Token, parse_bracketed, render_bracketed
from .validity import ValidityReport, check_validity, extract_tree_region


class CheckerMode(str, Enum):
    RULE_BASED = "rule"
    LLM_BASED = "llm"


@dataclass(frozen=True)
class PMCConfig:
    max_rounds: int = 3
    checker_mode: CheckerMode = CheckerMode.RULE_BASED
    stop_on_clean: bool = True

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass(frozen=True)
class RoundTrace:
    round: int
    prompt: str
    raw_output: str
    validity: ValidityReport
    faithfulness: FaithfulnessReport

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "prompt": self.prompt,
            "raw_output": self.raw_output,
            "validity": self.validity.to_dict(),
            "faithfulness": self.faithfulness.to_dict(),
        }


@dataclass(frozen=True)
class PMCSession:
    sentence: tuple[Token, ...]
    rounds: tuple[RoundTrace, ...]
    final_raw: str | None
    final_tree: ConstituencyTree | None
    converged: bool

    def to_dict(self) -> dict:
        return {
            "sentence": [t.surface for t in self.sentence],
            "rounds": [r.to_dict() for r in self.rounds],
            "final_raw": self.final_raw,
            "final_tree": render_bracketed(self.final_tree) if self.final_tree else None,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


def _extract_json(text: str) -> dict | None:
    """First balanced {...} object in the text, or None."""
    start = text.find("{")
    if start == -1:
        return None
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                try:
                    obj = json.loads(text[start:i + 1])
                except json.JSONDecodeError:
                    return None
                return obj if isinstance(obj, dict) else None
    return None


def checker_feedback(
    tree_raw: str,
    sentence: Sequence[Token],
    mode: CheckerMode | str = CheckerMode.RULE_BASED,
    backend: CompletionBackend | None = None,
    *,
    demos: Sequence[str] = (),
) -> tuple[ValidityReport, FaithfulnessReport]:
    """Run both checker agents over a predicted tree.

    LLM-based checking prompts the backend and parses the JSON reply, falling
    back to the rule-based checker whenever the reply cannot be interpreted.
    """
    mode = CheckerMode(mode)
    validity = check_validity(tree_raw, sentence)
    faithfulness = check_faithfulness(tree_raw, sentence)
    if mode is CheckerMode.RULE_BASED:
        return validity, faithfulness

    if backend is None:
        raise ValueError("LLM-based checking requires a backend")
    sentence_text = " ".join(t.surface for t in sentence)

    prompt = build_checker_prompt("validity", tree_raw, sentence_text, demos)
    reply = _extract_json(backend.complete(CompletionRequest(prompt=prompt)).text)
    if reply is not None:
        try:
            validity = ValidityReport.from_dict(reply)
        except (KeyError, ValueError, TypeError):
            pass

    prompt = build_checker_prompt("faithfulness", tree_raw, sentence_text, demos)
    reply = _extract_json(backend.complete(CompletionRequest(prompt=prompt)).text)
    if reply is not None:
        try:
            faithfulness = FaithfulnessReport.from_dict(reply)
        except (KeyError, ValueError, TypeError):
            pass

    return validity, faithfulness


def render_feedback(
    validity: ValidityReport | None, faithfulness: FaithfulnessReport | None
) -> str:
    """Both reports as bulleted lines under fixed headers; None means empty."""
    lines = ["Validity feedback:"]
    if validity is None or validity.valid:
        lines.append("- (none)")
    else:
        lines.extend(f"- {e.message}" for e in validity.errors)
    lines.append("Faithfulness feedback:")
    if faithfulness is None or faithfulness.faithful:
        lines.append("- (none)")
    else:
        lines.extend(f"- {e.detail}" for e in faithfulness.errors)
    return "\n".join(lines)


def build_pmc_prompt(
    sentence_text: str,
    *,
    task_introduction: str,
    instruction: str,
    demonstrations: Sequence[tuple[str, str]] = (),
    previous_output: str | None = None,
    validity: ValidityReport | None = None,
    faithfulness: FaithfulnessReport | None = None,
) -> str:
    parts = [
        "Task Introduction:\n" + task_introduction,
        "Instruction:\n" + instruction,
    ]
    if demonstrations:
        demo_tpl = load_template("demonstration")
        parts.append("Training Instances:\n" + "\n".join(
            render_template(demo_tpl, sentence=s, tree=t) for s, t in demonstrations
        ))
    parts.append("Previous Output:\n" + (previous_output if previous_output else "(none)"))
    parts.append(render_feedback(validity, faithfulness))
    parts.append(
        "Task Input:\n"
        + render_template(load_template("task_input"), sentence=sentence_text)
    )
    return "\n\n".join(parts)


def run_pmc(
    sentence: Sequence[Token],
    backend: CompletionBackend,
    config: PMCConfig = PMCConfig(),
    *,
    strategy: Strategy | str = Strategy.BRACKET,
    demonstrations: Sequence[tuple[str, str]] = (),
    task_introduction: str | None = None,
    instruction: str | None = None,
    checker_backend: CompletionBackend | None = None,
    checker_demos: Sequence[str] = (),
    temperature: float = 0.0,
    max_tokens: int = 2048,
    model_id: str = "",
) -> PMCSession:
    """Iterate parser and checker agents over one preprocessed sentence.

    Backend failures propagate with the completed rounds attached to the
    exception as ``partial_rounds``.
    """
    strategy = Strategy(strategy)
    if strategy is not Strategy.BRACKET:
        raise ValueError("the refinement loop checks bracket output only")
    sentence = tuple(sentence)
    sentence_text = " ".join(t.surface for t in sentence)
    intro = task_introduction or default_task_introduction()
    instr = instruction or default_instruction(strategy)

    rounds: list[RoundTrace] = []
    previous_output: str | None = None
    validity: ValidityReport | None = None
    faithfulness: FaithfulnessReport | None = None
    converged = False

    for round_no in range(1, config.max_rounds + 1):
        prompt = build_pmc_prompt(
            sentence_text,
            task_introduction=intro,
            instruction=instr,
            demonstrations=demonstrations,
            previous_output=previous_output,
            validity=validity,
            faithfulness=faithfulness,
        )
        try:
            response = backend.complete(CompletionRequest(
                prompt=prompt,
                temperature=temperature,
                max_tokens=max_tokens,
                model_id=model_id,
            ))
        except BackendError as exc:
            exc.partial_rounds = tuple(rounds)
            raise
        raw = response.text
        validity, faithfulness = checker_feedback(
            raw, sentence, config.checker_mode,
            checker_backend or backend, demos=checker_demos,
        )
        rounds.append(RoundTrace(round_no, prompt, raw, validity, faithfulness))
        previous_output = raw
        if validity.valid and faithfulness.faithful:
            converged = True
            if config.stop_on_clean:
                break

    final_raw = rounds[-1].raw_output if rounds else None
    final_tree = None
    if rounds and rounds[-1].validity.valid:
        region = extract_tree_region(final_raw)
        if region is not None:
            try:
                final_tree = parse_bracketed(region)
            except ValueError:
                final_tree = None
    converged = bool(
        rounds and rounds[-1].validity.valid and rounds[-1].faithfulness.faithful
    ) and converged

    return PMCSession(
        sentence=sentence,
        rounds=tuple(rounds),
        final_raw=final_raw,
        final_tree=final_tree,
        converged=converged,
    )
