/** Typed client for the generation service JSON API. */

export interface SubjectInfo {
  subject: string;
  level: string;
  edition: string;
}

export interface GeneratePayload {
  level: string;
  subject: string;
  periods: number;
  class_size: string;
  topic: string;
}

export interface ProcedureStep {
  phase: string;
  minutes: number;
  teacher_activity: string;
  learner_activity: string;
}

export interface PeriodBlock {
  preparation: Record<string, string>;
  procedure: ProcedureStep[];
}

export interface PlanDocument {
  general_information: Record<string, string>;
  preparation: Record<string, string>;
  procedure: ProcedureStep[];
  extra_periods: PeriodBlock[];
}

export interface ConfidenceInfo {
  chunk_count: number;
  distinct_pages: number;
  page_equivalents: number;
  low_evidence: boolean;
}

export interface GenerateResponse {
  plan: PlanDocument;
  rendered: string;
  confidence: ConfidenceInfo;
  warnings: string[];
  retries_used: number;
}

export interface ApiErrorBody {
  stage: string;
  reason: string;
  field?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody | null,
  ) {
    super(body ? `${body.stage}: ${body.reason}` : `HTTP ${status}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchLike = (input, init) => fetch(input, init);

async function errorBody(response: Response): Promise<ApiErrorBody | null> {
  try {
    const body = (await response.json()) as ApiErrorBody;
    return typeof body.reason === "string" ? body : null;
  } catch {
    return null;
  }
}

export async function fetchSubjects(
  baseUrl = "",
  fetchFn: FetchLike = defaultFetch,
): Promise<SubjectInfo[]> {
  const response = await fetchFn(`${baseUrl}/api/subjects`);
  if (!response.ok) {
    throw new ApiError(response.status, await errorBody(response));
  }
  return (await response.json()) as SubjectInfo[];
}

export async function generatePlan(
  payload: GeneratePayload,
  options: { baseUrl?: string; signal?: AbortSignal; fetchFn?: FetchLike } = {},
): Promise<GenerateResponse> {
  const { baseUrl = "", signal, fetchFn = defaultFetch } = options;
  const response = await fetchFn(`${baseUrl}/api/generate`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
    signal,
  });
  if (!response.ok) {
    throw new ApiError(response.status, await errorBody(response));
  }
  return (await response.json()) as GenerateResponse;
}
