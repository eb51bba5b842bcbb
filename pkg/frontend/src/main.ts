/** DOM glue: populate the form from /api/subjects, submit generations, render results. */

import { fetchSubjects, generatePlan, type GeneratePayload, type SubjectInfo } from "./api.js";
import {
  canSubmit,
  describeError,
  initialFormState,
  optionsFromSubjects,
  type FormState,
} from "./state.js";
import { escapeHtml, renderEmptySubjects, renderPlanView, renderSubjectsError } from "./render.js";

const state: FormState = initialFormState();
let inFlight: AbortController | null = null;

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

const form = () => element<HTMLFormElement>("plan-form");
const levelSelect = () => element<HTMLSelectElement>("level");
const subjectSelect = () => element<HTMLSelectElement>("subject");
const periodsSelect = () => element<HTMLSelectElement>("periods");
const classSizeSelect = () => element<HTMLSelectElement>("class-size");
const topicInput = () => element<HTMLInputElement>("topic");
const submitButton = () => element<HTMLButtonElement>("generate");
const statusArea = () => element<HTMLDivElement>("status");
const resultArea = () => element<HTMLDivElement>("result");

function fillSelect(select: HTMLSelectElement, values: (string | number)[]): void {
  select.replaceChildren(
    ...values.map((value) => {
      const option = document.createElement("option");
      option.value = String(value);
      option.textContent = String(value);
      return option;
    }),
  );
}

function syncState(): void {
  state.level = levelSelect().value;
  state.subject = subjectSelect().value;
  state.periods = Number(periodsSelect().value) || 1;
  state.classSize = classSizeSelect().value;
  state.topic = topicInput().value;
  submitButton().disabled = !canSubmit(state);
}

async function populateSubjects(): Promise<void> {
  statusArea().textContent = "Loading subjects…";
  let subjects: SubjectInfo[];
  try {
    subjects = await fetchSubjects();
  } catch {
    statusArea().innerHTML = renderSubjectsError();
    document.getElementById("retry-subjects")?.addEventListener("click", () => void populateSubjects());
    return;
  }
  statusArea().textContent = "";
  if (subjects.length === 0) {
    statusArea().innerHTML = renderEmptySubjects();
    submitButton().disabled = true;
    return;
  }
  const options = optionsFromSubjects(subjects);
  fillSelect(levelSelect(), options.levels);
  fillSelect(subjectSelect(), options.subjects);
  fillSelect(periodsSelect(), options.periods);
  fillSelect(classSizeSelect(), options.classSizes);
  classSizeSelect().value = ">60";
  syncState();
}

async function submit(): Promise<void> {
  syncState();
  if (!canSubmit(state)) return;

  inFlight?.abort(); // a new submit cancels the active request
  const controller = new AbortController();
  inFlight = controller;

  const payload: GeneratePayload = {
    level: state.level,
    subject: state.subject,
    periods: state.periods,
    class_size: state.classSize,
    topic: state.topic.trim(),
  };

  state.requestInFlight = true;
  submitButton().disabled = true;
  statusArea().textContent = "Generating lesson plan…";

  try {
    const response = await generatePlan(payload, { signal: controller.signal });
    statusArea().textContent = "";
    resultArea().innerHTML = renderPlanView(response);
  } catch (error) {
    if (controller.signal.aborted) return; // superseded by a newer submit
    const described = describeError(error);
    statusArea().innerHTML =
      `<div class="error-message" role="alert">${escapeHtml(described.message)}` +
      (described.retryable ? ' <button type="button" id="retry-generate">Retry</button>' : "") +
      `</div>`;
    document.getElementById("retry-generate")?.addEventListener("click", () => void submit());
  } finally {
    if (inFlight === controller) {
      state.requestInFlight = false;
      inFlight = null;
    }
    syncState();
  }
}

document.addEventListener("DOMContentLoaded", () => {
  void populateSubjects();
  form().addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });
  topicInput().addEventListener("input", syncState);
  for (const select of [levelSelect(), subjectSelect(), periodsSelect(), classSizeSelect()]) {
    select.addEventListener("change", syncState);
  }
});
