/** Word-level diffing for revision comparison.
 *
 * The server reports which fields changed between two revisions; this module
 * turns each changed value pair into token-level highlighting so reviewers
 * can see exactly what moved inside long text bodies.
 */

import { el } from "./dom.js";

export interface DiffOp {
  kind: "same" | "removed" | "added";
  text: string;
}

function tokens(text: string): string[] {
  // keep separators so rejoining reproduces the exact original
  return text.split(/(\s+)/).filter((t) => t.length > 0);
}

/** Longest-common-subsequence word diff: removed ++ same reproduces
 * ``before``; same ++ added reproduces ``after``. */
export function wordDiff(before: string, after: string): DiffOp[] {
  const a = tokens(before);
  const b = tokens(after);
  const n = a.length;
  const m = b.length;
  // lcs[i][j] = LCS length of a[i:], b[j:]
  const lcs: number[][] = Array.from({ length: n + 1 }, () =>
    new Array<number>(m + 1).fill(0));
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i]![j] = a[i] === b[j]
        ? lcs[i + 1]![j + 1]! + 1
        : Math.max(lcs[i + 1]![j]!, lcs[i]![j + 1]!);
    }
  }
  const ops: DiffOp[] = [];
  const push = (kind: DiffOp["kind"], text: string) => {
    const last = ops[ops.length - 1];
    if (last && last.kind === kind) last.text += text;
    else ops.push({ kind, text });
  };
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (a[i] === b[j]) {
      push("same", a[i]!);
      i++;
      j++;
    } else if (lcs[i + 1]![j]! >= lcs[i]![j + 1]!) {
      push("removed", a[i]!);
      i++;
    } else {
      push("added", b[j]!);
      j++;
    }
  }
  while (i < n) push("removed", a[i++]!);
  while (j < m) push("added", b[j++]!);
  return ops;
}

function asText(value: unknown): string {
  if (value == null) return "";
  if (typeof value === "string") return value;
  if (Array.isArray(value)) {
    return value.map((item) => asText(item)).join("\n");
  }
  if (typeof value === "object") {
    return Object.entries(value as Record<string, unknown>)
      .map(([k, v]) => `${k}: ${asText(v)}`)
      .join(" | ");
  }
  return String(value);
}

export function renderValueDiff(from: unknown, to: unknown): HTMLElement {
  const container = el("div", { class: "text-diff" });
  for (const op of wordDiff(asText(from), asText(to))) {
    const span = el("span", { class: `diff-${op.kind}` }, op.text);
    container.append(span);
  }
  return container;
}
