/** Stage payload editing: scenario content <-> form text, and anchoring of
 * server validation findings onto the form field that caused them.
 *
 * List-shaped groups edit as one item per line; users as ``role | traits``;
 * risks as ``[category-id] text`` (the same shapes the pipeline's own output
 * format uses, so reviewers read and write one notation).
 */

import type { Finding, ScenarioDoc, StageName } from "./types.js";

export const STAGE_FIELDS: Record<StageName, string[]> = {
  stage1: ["title", "description"],
  stage2: [
    "direct_users",
    "indirect_users",
    "intended_outcomes",
    "benefits",
    "risks",
    "kpis",
  ],
  stage3: ["narrative", "evaluation_objective"],
};

export const FIELD_LABELS: Record<string, string> = {
  title: "Title",
  description: "Description (one sentence)",
  direct_users: "Direct users (role | characteristics, one per line)",
  indirect_users: "Indirect users (role | characteristics, one per line)",
  intended_outcomes: "Intended outcomes (one per line)",
  benefits: "Benefits (one per line)",
  risks: "Risks ([category-id] text, one per line)",
  kpis: "KPIs and metrics (one per line)",
  narrative: "Narrative",
  evaluation_objective: "Evaluation objective",
};

const MULTILINE_FIELDS = new Set([
  "direct_users", "indirect_users", "intended_outcomes", "benefits",
  "risks", "kpis", "narrative", "evaluation_objective",
]);

export function isMultiline(field: string): boolean {
  return MULTILINE_FIELDS.has(field);
}

export function scenarioToFormValues(
  stage: StageName, doc: ScenarioDoc): Record<string, string> {
  const values: Record<string, string> = {};
  for (const field of STAGE_FIELDS[stage]) {
    switch (field) {
      case "direct_users":
      case "indirect_users":
        values[field] = doc[field]
          .map((u) => (u.characteristics
            ? `${u.role} | ${u.characteristics}` : u.role))
          .join("\n");
        break;
      case "risks":
        values[field] = doc.risks
          .map((r) => `[${r.category_id}] ${r.text}`)
          .join("\n");
        break;
      case "intended_outcomes":
      case "benefits":
      case "kpis":
        values[field] = doc[field].join("\n");
        break;
      case "narrative":
      case "evaluation_objective":
        values[field] = doc[field] ?? "";
        break;
      default:
        values[field] = String(
          (doc as unknown as Record<string, unknown>)[field] ?? "");
    }
  }
  return values;
}

function lines(text: string): string[] {
  return text.split("\n").map((l) => l.trim()).filter((l) => l.length > 0);
}

export function formValuesToPayload(
  stage: StageName, values: Record<string, string>):
    Record<string, unknown> {
  const payload: Record<string, unknown> = {};
  for (const field of STAGE_FIELDS[stage]) {
    const raw = values[field] ?? "";
    switch (field) {
      case "direct_users":
      case "indirect_users":
        payload[field] = lines(raw).map((line) => {
          const [role = "", ...rest] = line.split("|");
          return {
            role: role.trim(),
            characteristics: rest.join("|").trim(),
          };
        });
        break;
      case "risks":
        payload[field] = lines(raw).map((line) => {
          const match = /^\[([^\]]*)\]\s*(.*)$/.exec(line);
          if (match) {
            return { text: match[2] ?? "", category_id: match[1] ?? "" };
          }
          return { text: line, category_id: "" };
        });
        break;
      case "intended_outcomes":
      case "benefits":
      case "kpis":
        payload[field] = lines(raw);
        break;
      default:
        payload[field] = raw.trim();
    }
  }
  return payload;
}

/** The form group a server finding anchors to: ``risks[2].category_id``
 * belongs under the ``risks`` editor. */
export function findingAnchor(finding: Finding): string {
  const match = /^([a-z_]+)/.exec(finding.field);
  return match ? match[1]! : finding.field;
}

export function groupFindings(findings: Finding[]):
    Map<string, Finding[]> {
  const grouped = new Map<string, Finding[]>();
  for (const finding of findings) {
    const anchor = findingAnchor(finding);
    const bucket = grouped.get(anchor) ?? [];
    bucket.push(finding);
    grouped.set(anchor, bucket);
  }
  return grouped;
}
