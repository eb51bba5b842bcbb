/** Form state and error mapping, kept DOM-free for testability. */

import type { ApiError, SubjectInfo } from "./api.js";

export const DEFAULT_PERIOD_OPTIONS = [1, 2, 3] as const;
export const DEFAULT_CLASS_SIZES = ["<30", "30-60", ">60"] as const;

export interface FormState {
  level: string;
  subject: string;
  periods: number;
  classSize: string;
  topic: string;
  requestInFlight: boolean;
}

export interface FormOptions {
  levels: string[];
  subjects: string[];
  periods: number[];
  classSizes: string[];
}

export function initialFormState(): FormState {
  return {
    level: "",
    subject: "",
    periods: 1,
    classSize: ">60",
    topic: "",
    requestInFlight: false,
  };
}

/** Dropdown options derived from the deployed stores; levels are constrained
 * to those actually present in the manifests. */
export function optionsFromSubjects(subjects: SubjectInfo[]): FormOptions {
  const levels = [...new Set(subjects.map((s) => s.level))].sort();
  const names = [...new Set(subjects.map((s) => s.subject))];
  return {
    levels,
    subjects: names,
    periods: [...DEFAULT_PERIOD_OPTIONS],
    classSizes: [...DEFAULT_CLASS_SIZES],
  };
}

export function canSubmit(state: FormState): boolean {
  return !state.requestInFlight && state.topic.trim().length > 0 && state.subject !== "";
}

export interface UserFacingError {
  message: string;
  field?: string;
  retryable: boolean;
}

/** Map service failures onto short, actionable messages. */
export function describeError(error: unknown): UserFacingError {
  const apiError = error as Partial<ApiError>;
  if (typeof apiError?.status === "number") {
    const body = apiError.body ?? null;
    switch (apiError.status) {
      case 400:
        return {
          message: body?.field ? `Please check the ${body.field} field: ${body.reason}.` : "Please check the form inputs.",
          field: body?.field,
          retryable: false,
        };
      case 404:
        return { message: "No textbook store is deployed for that subject.", field: "subject", retryable: false };
      case 422:
        return { message: "The generator returned a malformed plan. Trying again usually helps.", retryable: true };
      case 502:
        return { message: "The language model service is unreachable. Try again shortly.", retryable: true };
      case 503:
        return { message: "The service is still loading its textbook stores.", retryable: true };
      default:
        return { message: `Unexpected service error (HTTP ${apiError.status}).`, retryable: true };
    }
  }
  if (error instanceof DOMException && error.name === "AbortError") {
    return { message: "Request cancelled.", retryable: false };
  }
  return { message: "Could not reach the service. Check your connection and retry.", retryable: true };
}
