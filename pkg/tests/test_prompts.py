"""Prompt template contract and rendering tests."""

import pytest

from scenarioforge.errors import PromptRenderError, TemplateError
from scenarioforge.prompts import (
    PromptTemplate,
    default_template_files,
    load_templates,
    render_prompt,
    validate_template,
)
from scenarioforge.schema import Stage


@pytest.fixture
def templates_dir(tmp_path):
    for name, content in default_template_files().items():
        (tmp_path / name).write_text(content, encoding="utf-8")
    return tmp_path


STAGE1_CONTEXT = {
    "use_case_name": "Cyber Defense Enablement",
    "sector": "Financial Services",
    "impacts": "Positive:\n- faster containment\nNegative:\n- overreliance",
    "count": "18",
}


class TestRender:
    def test_stage1_inputs_appear_verbatim(self, templates_dir):
        template = load_templates(templates_dir)[Stage.STAGE1]
        rendered = render_prompt(template, STAGE1_CONTEXT)
        assert "Cyber Defense Enablement" in rendered
        assert "Financial Services" in rendered
        assert "faster containment" in rendered
        assert "overreliance" in rendered
        assert "exactly 18" in rendered

    def test_no_placeholder_markers_remain(self, templates_dir):
        template = load_templates(templates_dir)[Stage.STAGE1]
        rendered = render_prompt(template, STAGE1_CONTEXT)
        for name in ("use_case_name", "sector", "impacts", "count",
                     "style_guideline", "feedback"):
            assert ("{%s}" % name) not in rendered

    def test_missing_placeholder_named(self, templates_dir):
        template = load_templates(templates_dir)[Stage.STAGE1]
        context = dict(STAGE1_CONTEXT)
        del context["sector"]
        with pytest.raises(PromptRenderError, match="missing placeholder: sector"):
            render_prompt(template, context)

    def test_rendering_is_deterministic(self, templates_dir):
        template = load_templates(templates_dir)[Stage.STAGE1]
        first = render_prompt(template, STAGE1_CONTEXT)
        second = render_prompt(template, STAGE1_CONTEXT)
        assert first == second

    def test_style_guideline_included(self, templates_dir):
        templates = load_templates(templates_dir)
        rendered = render_prompt(templates[Stage.STAGE1], STAGE1_CONTEXT)
        assert templates[Stage.STAGE1].style_guideline.splitlines()[0] in rendered

    def test_braces_in_values_do_not_reexpand(self, templates_dir):
        template = load_templates(templates_dir)[Stage.STAGE1]
        context = dict(STAGE1_CONTEXT, impacts="uses {braces} literally")
        rendered = render_prompt(template, context)
        assert "uses {braces} literally" in rendered

    def test_value_smuggling_a_marker_is_refused(self, templates_dir):
        template = load_templates(templates_dir)[Stage.STAGE1]
        context = dict(STAGE1_CONTEXT, impacts="sneaky {sector}")
        with pytest.raises(PromptRenderError, match="placeholder marker"):
            render_prompt(template, context)


class TestTemplateValidation:
    def test_body_must_use_required_placeholders(self):
        template = PromptTemplate(
            stage=Stage.STAGE1, style_guideline="g",
            body="only {use_case_name} and {sector}")
        with pytest.raises(TemplateError, match="count"):
            validate_template(template)

    def test_unknown_placeholder_rejected(self):
        template = PromptTemplate(
            stage=Stage.STAGE3, style_guideline="g",
            body="{use_case_name} {sector} {title} {description} {elements} "
                 "{mystery}")
        with pytest.raises(TemplateError, match="mystery"):
            validate_template(template)

    def test_missing_file_reported(self, tmp_path):
        with pytest.raises(TemplateError, match="style guideline"):
            load_templates(tmp_path)

    def test_templates_hot_reload(self, templates_dir):
        before = load_templates(templates_dir)[Stage.STAGE1]
        path = templates_dir / "stage1.txt"
        path.write_text(before.body + "\nExtra instruction line.",
                        encoding="utf-8")
        after = load_templates(templates_dir)[Stage.STAGE1]
        assert after.body != before.body
        assert "Extra instruction line." in after.body
