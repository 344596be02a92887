"""Shared fixtures: a small survey study (the chart-unwind walkthrough uses
it) and an empty project."""

from __future__ import annotations

import pytest

from mmworkbench.model import OriginDescriptor, OriginMethod, Project
from mmworkbench.session import Session

# participant x question x condition Likert responses; deterministic pattern
RESPONSES = {
    ("P1", "Q1", "A"): 4, ("P2", "Q1", "A"): 5, ("P3", "Q1", "A"): 4,
    ("P4", "Q1", "A"): 2, ("P5", "Q1", "A"): 4, ("P6", "Q1", "A"): 5,
    ("P1", "Q1", "B"): 2, ("P2", "Q1", "B"): 3, ("P3", "Q1", "B"): 2,
    ("P4", "Q1", "B"): 1, ("P5", "Q1", "B"): 3, ("P6", "Q1", "B"): 2,
    ("P1", "Q2", "A"): 3, ("P2", "Q2", "A"): 4, ("P3", "Q2", "A"): 3,
    ("P4", "Q2", "A"): 5, ("P5", "Q2", "A"): 3, ("P6", "Q2", "A"): 4,
    ("P1", "Q2", "B"): 1, ("P2", "Q2", "B"): 2, ("P3", "Q2", "B"): 2,
    ("P4", "Q2", "B"): 1, ("P5", "Q2", "B"): 2, ("P6", "Q2", "B"): 1,
}

INTERVIEWS = {
    "P1": "I liked the layout a lot. The second task felt slow and confusing.",
    "P2": "Great overall. I picked five because the flow was smooth.",
    "P3": "The layout worked for me, though condition B was harder to follow.",
    "P4": "I struggled with the controls and gave low marks because of lag.",
    "P5": "Generally fine. Some hiccups in the slower condition.",
    "P6": "Loved it. Clear structure, quick responses, easy recovery.",
}


def survey_csv() -> bytes:
    lines = ["participant,question,condition,response"]
    for (p, q, c), r in RESPONSES.items():
        lines.append(f"{p},{q},{c},{r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def build_study_session(project_id: str = "prj-study", bus=None) -> Session:
    """Survey table + per-participant interview docs + a median-bar notebook."""
    project = Project.new("usability study", project_id=project_id)
    session = Session(project, bus=bus)
    session.import_source(
        "table", "survey", survey_csv(),
        OriginDescriptor(method=OriginMethod.survey))
    for participant, text in INTERVIEWS.items():
        session.import_source(
            "text", f"interview_{participant}", text.encode("utf-8"),
            OriginDescriptor(method=OriginMethod.interview, participant=participant))
    code = session.create_code("sentiment")
    doc1 = session.project.data_sources[1].payload  # P1's interview
    session.annotate(doc1.id, (0, 22), [code.id], "positive on layout", "analyst")
    session.add_cell("code", 't = tables("survey")')
    session.add_cell(
        "code", 'gm = group_median(t, ["question", "condition"], "response")\ngm')
    session.add_cell("code", 'bar(gm, "group", "median")')
    session.execute_all()
    return session


@pytest.fixture
def study() -> Session:
    return build_study_session()


@pytest.fixture
def empty_project() -> Project:
    return Project.new("empty", project_id="prj-empty")
