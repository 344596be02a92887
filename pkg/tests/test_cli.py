"""CLI: init, import, headless run (idempotent), export."""

from __future__ import annotations

import json

import pytest

from mmworkbench.cli import main, run_headless
from mmworkbench.model import load_project, save_project

from conftest import build_study_session, survey_csv


@pytest.fixture
def project_file(tmp_path):
    session = build_study_session(project_id="prj-cli")
    path = tmp_path / "project.mmw.json"
    path.write_bytes(save_project(session.project))
    return path


def test_init_creates_project(tmp_path, capsys):
    target = tmp_path / "mystudy"
    assert main(["init", str(target), "--name", "my study"]) == 0
    path = target / "project.mmw.json"
    project = load_project(path.read_bytes())
    assert project.name == "my study"
    assert main(["init", str(target)]) == 1  # refuses to overwrite


def test_import_text_and_table(tmp_path):
    target = tmp_path / "s"
    main(["init", str(target)])
    project_path = target / "project.mmw.json"
    csv_file = tmp_path / "survey.csv"
    csv_file.write_bytes(survey_csv())
    txt_file = tmp_path / "p1.txt"
    txt_file.write_text("it was fine")
    assert main(["--project", str(project_path), "import", "--kind", "table",
                 "--origin", "survey", str(csv_file)]) == 0
    assert main(["--project", str(project_path), "import", "--kind", "text",
                 "--origin", "interview", "--participant", "P1",
                 str(txt_file)]) == 0
    project = load_project(project_path.read_bytes())
    assert [s.name for s in project.data_sources] == ["survey", "p1"]
    assert project.data_sources[1].origin.participant == "P1"


def test_run_headless_reports_cells(project_file, capsys):
    assert run_headless(project_file) == 0
    out = capsys.readouterr().out
    assert "3 cells, 0 failed" in out


def test_run_headless_idempotent(project_file):
    assert run_headless(project_file) == 0
    first = project_file.read_bytes()
    assert run_headless(project_file) == 0
    assert project_file.read_bytes() == first


def test_run_exit_1_on_cell_error_names_cell(project_file, capsys):
    project = load_project(project_file.read_bytes())
    from mmworkbench.session import Session
    session = Session(project)
    bad = session.add_cell("code", "boom()")
    project_file.write_bytes(save_project(project))
    assert run_headless(project_file) == 1
    out = capsys.readouterr().out
    assert bad.id in out and "ERROR" in out


def test_run_exit_2_on_corrupt_file(tmp_path, capsys):
    path = tmp_path / "broken.mmw.json"
    path.write_bytes(b"{malformed")
    assert run_headless(path) == 2


def test_run_json_mode(project_file, capsys):
    assert main(["--project", str(project_file), "run", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["status"] == "ok"
    assert len(report["cells"]) == 3


def test_export_json_is_canonical_save(project_file, tmp_path):
    out = tmp_path / "copy.json"
    assert main(["--project", str(project_file), "export", "--format", "json",
                 "--out", str(out)]) == 0
    assert out.read_bytes() == project_file.read_bytes()


def test_export_html_smoke(project_file, tmp_path):
    out = tmp_path / "report.html"
    assert main(["--project", str(project_file), "export", "--format", "html",
                 "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("<!DOCTYPE html>")


def test_export_unwritable_path(project_file, tmp_path):
    out = tmp_path / "nope" / "deep" / "report.html"
    assert main(["--project", str(project_file), "export", "--format", "html",
                 "--out", str(out)]) == 1
