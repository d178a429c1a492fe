"""Prompt templates for every campaign phase, rendered via string.Template."""

from __future__ import annotations

from dataclasses import dataclass, field
from string import Template

from reasonbo.core import ExperimentCompass


class PromptError(KeyError):
    """A template referenced a placeholder that was not supplied."""


PHASES = (
    "overview",
    "notes-compass",
    "init-insights",
    "filter",
    "notes-reasoning",
    "loop-insights",
    "summary",
    "conclusion",
)

SYSTEM_MESSAGE = (
    "You are an experiment-design assistant embedded in an iterative "
    "optimization campaign. Ground every statement in the data you are given "
    "and follow the requested output format exactly."
)

INSIGHTS_FORMAT = """Reply with a single JSON object, no surrounding prose:
{
  "comments": "<your analysis of the data so far>",
  "keywords": ["<retrieval keyword>", ...],
  "hypotheses": [
    {"id": "h1", "statement": "<testable hypothesis>", "confidence": 0.0-1.0,
     "status": "proposed|supported|refuted"}
  ],
  "candidates": [ {"<parameter name>": <value>, ...}, ... ]
}"""

NOTES_FORMAT = """Reply using exactly these five section headers:
Key findings:
Parameter relationships:
Optimization principles:
General notes:
Created knowledge triples:

Under the last header list one (Subject, Relation, Object) triple per line,
with a CamelCase relation and entities named after parameters or choices."""

DEFAULT_TEMPLATE_TEXT: dict[str, str] = {
    "overview": """$compass

Write a concise technical overview of this optimization campaign: the system
under study, what each parameter controls, and which interactions are likely
to matter. Mention parameters and choices by their exact names.""",
    "notes-compass": """$compass

Overview:
$overview

Distill the prior knowledge above into structured notes.
""" + NOTES_FORMAT,
    "init-insights": """$compass

Overview:
$overview

No experiments have run yet. Propose $n_candidates diverse, high-value initial
points to evaluate, with hypotheses explaining each choice.
""" + INSIGHTS_FORMAT,
    "filter": """$compass

Insight history:
$insight_history

Results so far:
$trial_data

The optimizer proposes these candidates, indexed from 0 and sorted by
acquisition score (best first):
$candidate_pool

Select the $n_select most promising, balancing exploitation against testing
your hypotheses. Reply with a JSON list of $n_select distinct indices, e.g.
[0, 2, 4], and nothing else.""",
    "notes-reasoning": """Reasoning transcript from the previous round:
$reasoning_text

Distill this reasoning into structured notes.
""" + NOTES_FORMAT,
    "loop-insights": """$compass

Insight history:
$insight_history

Results so far:
$trial_data

Points just evaluated:
$candidate_pool

Retrieved knowledge:
$retrieved_knowledge

Update your analysis: revise hypothesis confidences against the new data,
propose follow-up hypotheses, and give retrieval keywords for the next round.
""" + INSIGHTS_FORMAT,
    "summary": """$compass

All results:
$trial_data

Insight history:
$insight_history

Hypothesis confidence table (assembled mechanically from the history):
$confidence_table

Write a short narrative summary of how the campaign progressed and which
hypotheses the data supported or refuted. Judge strictly from the numbers.""",
    "conclusion": """$compass

All results:
$trial_data

Insight history:
$insight_history

Best observed: $best_point with value $best_value

Write the final campaign report with numbered sections: 1. Key outcomes,
2. Experimental retrospective, 3. Milestones achieved, 4. Definitive findings,
5. Forward guidance, 6. Scientific impact.""",
}


@dataclass(frozen=True)
class PromptBundle:
    templates: dict[str, Template] = field(
        default_factory=lambda: {k: Template(v) for k, v in DEFAULT_TEMPLATE_TEXT.items()}
    )

    def render(self, phase: str, **values: str) -> str:
        if phase not in self.templates:
            raise PromptError(f"no template for phase: {phase}")
        try:
            return self.templates[phase].substitute(**values)
        except KeyError as exc:
            raise PromptError(f"phase {phase} missing placeholder: {exc}") from exc


def render_compass_text(compass: ExperimentCompass) -> str:
    """Human-readable compass block for prompts.

    Deliberately excludes the machine evaluator binding, so prompt content
    never leaks how objective values are produced.
    """
    lines = [f"Experiment: {compass.title}", "", compass.description.strip(), ""]
    space = compass.space
    lines.append(
        f"Objective: {space.direction} {space.objective_name}"
    )
    lines.append("Parameters:")
    for p in space.parameters:
        if p.choices is not None:
            detail = "choices: " + ", ".join(p.choices)
        else:
            detail = f"range: [{p.bounds[0]}, {p.bounds[1]}]"
        unit = f" ({p.unit})" if p.unit else ""
        lines.append(f"- {p.name} [{p.kind}]{unit} {detail}")
    if compass.constraints_text:
        lines.append(f"Constraints: {compass.constraints_text}")
    b = compass.budget
    lines.append(
        f"Budget: {b.rounds} rounds x {b.candidates_per_round} evaluations, "
        f"pool of {b.bo_pool_size} per round"
    )
    return "\n".join(lines)
