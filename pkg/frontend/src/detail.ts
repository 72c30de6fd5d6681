/** Scenario detail: full content, revision diffs, the decision panel, and
 * rubric scoring. All state shown here comes from service responses; a
 * reload reproduces the same view.
 */

import { ApiClient, ApiError } from "./api.js";
import { renderValueDiff } from "./diff.js";
import { clear, el, option } from "./dom.js";
import {
  FIELD_LABELS,
  STAGE_FIELDS,
  formValuesToPayload,
  groupFindings,
  isMultiline,
  scenarioToFormValues,
} from "./editor.js";
import {
  STAGE_LABELS,
  STATE_LABELS,
  type DocumentResponse,
  type Finding,
  type ScenarioDoc,
  type StageName,
  type VerdictName,
} from "./types.js";

const VERDICT_LABELS: Record<VerdictName, string> = {
  approve: "Approve",
  edit_and_approve: "Edit & approve",
  request_regeneration: "Request regeneration",
  reject: "Reject",
};

function usersBlock(users: { role: string; characteristics: string }[]):
    HTMLElement {
  const list = el("ul", {});
  for (const user of users) {
    list.append(el("li", {}, user.characteristics
      ? `${user.role}: ${user.characteristics}` : user.role));
  }
  return list;
}

function itemsBlock(items: string[]): HTMLElement {
  const list = el("ul", {});
  for (const item of items) list.append(el("li", {}, item));
  return list;
}

export class ScenarioDetail {
  readonly root: HTMLElement;
  private readonly client: ApiClient;
  private readonly onDecided: () => void;
  private scenarioId = "";
  private reviewStage: StageName | null = null;
  private current: DocumentResponse<ScenarioDoc> | null = null;

  constructor(client: ApiClient, onDecided: () => void) {
    this.client = client;
    this.onDecided = onDecided;
    this.root = el("section", { class: "detail hidden" });
  }

  async open(scenarioId: string, reviewStage: StageName | null): Promise<void> {
    this.scenarioId = scenarioId;
    this.reviewStage = reviewStage;
    await this.reload();
  }

  async reload(): Promise<void> {
    this.current = await this.client.getScenario(this.scenarioId);
    this.root.classList.remove("hidden");
    this.render();
  }

  close(): void {
    this.root.classList.add("hidden");
    clear(this.root);
    this.current = null;
  }

  private render(): void {
    if (!this.current) return;
    const { doc, revision } = this.current;
    clear(this.root);

    const badges = el("div", { class: "badges" });
    for (const stage of ["stage1", "stage2", "stage3"] as StageName[]) {
      const state = doc.stage_states[stage];
      badges.append(el("span",
        { class: `badge state-${state}`, "data-stage-badge": stage },
        `${STAGE_LABELS[stage]}: ${STATE_LABELS[state]}`));
    }
    this.root.append(
      el("div", { class: "detail-header" },
        el("h2", { "data-role": "scenario-title" }, doc.title),
        el("p", { class: "meta" },
          `${doc.id} · revision ${revision} · ${doc.use_case_id}`),
        badges));

    this.root.append(this.renderElements(doc));
    this.root.append(this.renderRevisions(doc));
    if (this.reviewStage
        && doc.stage_states[this.reviewStage] === "pending_review") {
      this.root.append(this.renderDecisionPanel(doc, this.reviewStage));
    }
    this.root.append(this.renderRubricPanel());
  }

  private renderElements(doc: ScenarioDoc): HTMLElement {
    const dl = el("div", { class: "elements" });
    const add = (label: string, body: Node | string) => {
      dl.append(el("div", { class: "element" },
        el("h4", {}, label),
        typeof body === "string" ? el("p", {}, body) : body));
    };
    add("Sector", doc.sector);
    add("Use case", doc.use_case_id);
    add("Description", doc.description);
    if (doc.narrative) add("Narrative", doc.narrative);
    if (doc.evaluation_objective) {
      add("Evaluation objective", doc.evaluation_objective);
    }
    if (doc.direct_users.length) add("Direct users", usersBlock(doc.direct_users));
    if (doc.indirect_users.length) {
      add("Indirect users", usersBlock(doc.indirect_users));
    }
    if (doc.intended_outcomes.length) {
      add("Intended outcomes", itemsBlock(doc.intended_outcomes));
    }
    if (doc.benefits.length) add("Benefits", itemsBlock(doc.benefits));
    if (doc.risks.length) {
      add("Risks", itemsBlock(
        doc.risks.map((r) => `[${r.category_id}] ${r.text}`)));
    }
    if (doc.kpis.length) add("KPIs and metrics", itemsBlock(doc.kpis));
    return el("div", { class: "panel" }, el("h3", {}, "Content"), dl);
  }

  private renderRevisions(doc: ScenarioDoc): HTMLElement {
    const panel = el("div", { class: "panel revisions" },
      el("h3", {}, "Revisions"));
    const list = el("ul", {});
    for (const rev of doc.revisions) {
      list.append(el("li", {},
        `r${rev.index} · ${rev.stage} · ${rev.origin} · ${rev.timestamp}`));
    }
    panel.append(list);
    if (doc.revisions.length >= 2) {
      const fromSelect = el("select", { "data-role": "diff-from" });
      const toSelect = el("select", { "data-role": "diff-to" });
      for (const rev of doc.revisions) {
        fromSelect.append(option(String(rev.index), `r${rev.index}`));
        toSelect.append(option(String(rev.index), `r${rev.index}`));
      }
      fromSelect.value = String(doc.revisions.length - 2);
      toSelect.value = String(doc.revisions.length - 1);
      const output = el("div", { class: "diff-output", "data-role": "diff-output" });
      const compare = el("button", { "data-role": "compare" }, "Compare");
      compare.addEventListener("click", () => {
        void this.showDiff(Number(fromSelect.value), Number(toSelect.value),
                           output);
      });
      panel.append(el("div", { class: "diff-controls" },
        fromSelect, el("span", {}, "→"), toSelect, compare), output);
    }
    return panel;
  }

  private async showDiff(from: number, to: number,
                         output: HTMLElement): Promise<void> {
    const diff = await this.client.diff(this.scenarioId, from, to);
    clear(output);
    if (diff.changes.length === 0) {
      output.append(el("p", { class: "empty" }, "No field changes."));
      return;
    }
    for (const change of diff.changes) {
      output.append(el("div", { class: "diff-field", "data-field": change.field },
        el("h5", {}, change.field),
        renderValueDiff(change.from, change.to)));
    }
  }

  private renderDecisionPanel(doc: ScenarioDoc, stage: StageName): HTMLElement {
    const panel = el("div", { class: "panel decision", "data-role": "decision" },
      el("h3", {}, `Decide ${STAGE_LABELS[stage]}`));
    const verdictSelect = el("select", { "data-role": "verdict" });
    for (const [value, label] of Object.entries(VERDICT_LABELS)) {
      verdictSelect.append(option(value, label));
    }
    const comments = el("textarea", {
      "data-role": "comments",
      placeholder: "Comments (stored as feedback on regeneration requests)",
    });
    const editor = el("div", { class: "editor hidden", "data-role": "editor" });
    const fields = new Map<string, HTMLInputElement | HTMLTextAreaElement>();
    const values = scenarioToFormValues(stage, doc);
    for (const field of STAGE_FIELDS[stage]) {
      const control = isMultiline(field)
        ? el("textarea", { "data-field-input": field })
        : el("input", { "data-field-input": field, type: "text" });
      control.value = values[field] ?? "";
      fields.set(field, control);
      editor.append(el("div", { class: "form-field", "data-field": field },
        el("label", {}, FIELD_LABELS[field] ?? field),
        control,
        el("div", { class: "field-errors", "data-errors": field })));
    }
    verdictSelect.addEventListener("change", () => {
      editor.classList.toggle("hidden",
        verdictSelect.value !== "edit_and_approve");
    });
    const errorBanner = el("div", { class: "banner hidden", "data-role": "error" });
    const conflictBanner = el("div",
      { class: "banner conflict hidden", "data-role": "conflict" });
    const submit = el("button", { class: "primary", "data-role": "submit" },
      "Submit decision");
    submit.addEventListener("click", () => void this.submitDecision(
      stage, verdictSelect.value as VerdictName, comments.value, fields,
      panel, errorBanner, conflictBanner));
    panel.append(verdictSelect, comments, editor, errorBanner,
                 conflictBanner, submit);
    return panel;
  }

  private async submitDecision(
    stage: StageName, verdict: VerdictName, comments: string,
    fields: Map<string, HTMLInputElement | HTMLTextAreaElement>,
    panel: HTMLElement, errorBanner: HTMLElement,
    conflictBanner: HTMLElement,
  ): Promise<void> {
    errorBanner.classList.add("hidden");
    conflictBanner.classList.add("hidden");
    for (const node of panel.querySelectorAll(".field-errors")) {
      clear(node as HTMLElement);
    }
    let editedPayload: Record<string, unknown> | undefined;
    if (verdict === "edit_and_approve") {
      const values: Record<string, string> = {};
      for (const [field, control] of fields) values[field] = control.value;
      editedPayload = formValuesToPayload(stage, values);
    }
    try {
      await this.client.submitReview(this.scenarioId, stage, verdict, {
        comments,
        ...(editedPayload !== undefined ? { editedPayload } : {}),
        idempotencyKey: `ui-${this.scenarioId}-${stage}-${Date.now()}-`
          + Math.random().toString(36).slice(2),
      });
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        // submission stays blocked: findings render on their fields
        this.renderFindings(error.findings, panel, errorBanner);
        return;
      }
      if (error instanceof ApiError && error.status === 409) {
        conflictBanner.classList.remove("hidden");
        clear(conflictBanner).append(
          el("span", {},
            `Someone changed this scenario (${error.code}): ${error.message} `),
          this.reloadButton());
        return;
      }
      throw error;
    }
    await this.reload();
    this.onDecided();
  }

  private reloadButton(): HTMLElement {
    const button = el("button", { "data-role": "reload" }, "Reload");
    button.addEventListener("click", () => void this.reload());
    return button;
  }

  private renderFindings(findings: Finding[], panel: HTMLElement,
                         errorBanner: HTMLElement): void {
    const grouped = groupFindings(findings);
    const loose: Finding[] = [];
    for (const [anchor, anchored] of grouped) {
      const slot = panel.querySelector(`[data-errors="${anchor}"]`);
      if (!slot) {
        loose.push(...anchored);
        continue;
      }
      for (const finding of anchored) {
        slot.append(el("p", { class: "finding", "data-rule": finding.rule },
          finding.message));
      }
    }
    errorBanner.classList.remove("hidden");
    clear(errorBanner).append(el("span", {},
      `Validation failed (${findings.length} finding(s)); fix the fields `
      + "and resubmit."));
    for (const finding of loose) {
      errorBanner.append(el("p", { class: "finding" },
        `${finding.field}: ${finding.message}`));
    }
  }

  private renderRubricPanel(): HTMLElement {
    const panel = el("div", { class: "panel rubric", "data-role": "rubric" },
      el("h3", {}, "Readiness rubric"));
    const form = el("div", { class: "rubric-form" });
    const result = el("div", { class: "rubric-result", "data-role": "rubric-result" });
    const inputs = new Map<string, HTMLInputElement>();
    void this.client.rubric().then((rubric) => {
      for (const category of rubric.categories) {
        const input = el("input", {
          type: "number", min: "1", max: String(rubric.scale_max),
          "data-score": category.id,
        });
        inputs.set(category.id, input);
        const questions = el("ul", { class: "questions" });
        for (const q of category.guiding_questions) {
          questions.append(el("li", {}, q));
        }
        form.append(el("div", { class: "rubric-category" },
          el("label", {}, `${category.name} (1–${rubric.scale_max})`),
          input, questions));
      }
      const submit = el("button",
        { class: "primary", "data-role": "score-rubric" }, "Record assessment");
      submit.addEventListener("click", () => void this.submitRubric(
        inputs, result));
      form.append(submit);
    });
    panel.append(form, result);
    return panel;
  }

  private async submitRubric(inputs: Map<string, HTMLInputElement>,
                             result: HTMLElement): Promise<void> {
    const scores: Record<string, number> = {};
    for (const [categoryId, input] of inputs) {
      if (input.value !== "") scores[categoryId] = Number(input.value);
    }
    clear(result);
    try {
      const assessment = await this.client.scoreRubric(this.scenarioId, scores);
      const verdict = assessment.verdict === "ready" ? "Ready" : "Not Ready";
      result.append(el("p", { class: `verdict ${assessment.verdict}` },
        el("strong", { "data-role": "weighted-score" },
          assessment.weighted_score.toFixed(2)),
        ` · `,
        el("strong", { "data-role": "verdict" }, verdict)));
      for (const [categoryId, entry] of
           Object.entries(assessment.per_category)) {
        for (const finding of entry.auto_findings) {
          result.append(el("p", { class: "finding" },
            `${categoryId}: ${finding}`));
        }
      }
    } catch (error) {
      if (error instanceof ApiError) {
        result.append(el("p", { class: "finding" },
          `Assessment refused: ${error.message}`));
        return;
      }
      throw error;
    }
  }
}
