/** HTML string builders for the plan view; pure functions over response data.
 *
 * The plan body embeds the server-sanitized `rendered` markup; warnings and
 * the confidence badge are built here and always precede the plan so a plan
 * is never shown without its warnings.
 */

import type { ConfidenceInfo, GenerateResponse } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#x27;");
}

export type ConfidenceLabel = "strong" | "thin" | "insufficient";

export function confidenceLabel(pageEquivalents: number): ConfidenceLabel {
  if (pageEquivalents < 1.0) return "insufficient";
  if (pageEquivalents < 2.0) return "thin";
  return "strong";
}

const WARNING_TEXT: Record<string, string> = {
  LOW_EVIDENCE:
    "Low evidence: the textbook contained less than a page of material on this topic, so the plan may include invented content. Review it carefully.",
  TOPIC_MISMATCH:
    "Topic mismatch: the generated plan may not address the topic you asked for. Compare the plan against your request.",
};

export function renderWarnings(warnings: string[]): string {
  if (warnings.length === 0) return "";
  const banners = warnings
    .map((code) => {
      const text = WARNING_TEXT[code] ?? `Warning: ${code}`;
      return `<div class="warning-banner" role="alert" data-warning="${escapeHtml(code)}">${escapeHtml(text)}</div>`;
    })
    .join("");
  return `<div class="warnings">${banners}</div>`;
}

export function renderConfidenceBadge(confidence: ConfidenceInfo): string {
  const label = confidenceLabel(confidence.page_equivalents);
  const pages = confidence.page_equivalents.toFixed(1);
  return (
    `<div class="confidence-badge confidence-${label}">` +
    `Evidence: ${pages} page${pages === "1.0" ? "" : "s"} of textbook material ` +
    `from ${confidence.distinct_pages} distinct page${confidence.distinct_pages === 1 ? "" : "s"} ` +
    `(${label})</div>`
  );
}

/** Compose the full result view: warnings first, then the confidence badge,
 * then the three plan sections as rendered by the service. */
export function renderPlanView(response: GenerateResponse): string {
  const retryNote =
    response.retries_used > 0
      ? `<p class="retry-note">Formatting was retried ${response.retries_used} time${response.retries_used === 1 ? "" : "s"}.</p>`
      : "";
  return (
    `<div class="plan-view">` +
    renderWarnings(response.warnings) +
    renderConfidenceBadge(response.confidence) +
    retryNote +
    `<div class="plan-body">${response.rendered}</div>` +
    `</div>`
  );
}

export function renderSubjectsError(): string {
  return (
    `<div class="load-error" role="alert">Could not load the subject list. ` +
    `<button type="button" id="retry-subjects">Retry</button></div>`
  );
}

export function renderEmptySubjects(): string {
  return `<div class="load-error" role="alert">No subjects are deployed yet; the form is disabled.</div>`;
}
