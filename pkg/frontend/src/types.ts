/** Shared types mirroring the annotation service's JSON schemas. */

export const MEANING = "meaning-AB";
export const FLUENCY = "fluency";

export type TaskKind = typeof MEANING | typeof FLUENCY;
export type MeaningVerdict = "A" | "=" | "B";
export type Verdict = MeaningVerdict | number;

export interface TaskPayload {
  task_id: string;
  kind: TaskKind;
  prompt: string;
  source: string;
  /** Candidate sentences keyed by slot; the key order is the served order. */
  candidates: Record<string, string>;
  /** The verdicts the server will accept for this task. */
  verdicts: Verdict[];
}

export interface Judgment {
  task_id: string;
  annotator: string;
  verdict: Verdict;
}

export interface Progress {
  tasks: number;
  judgments: number;
  annotators: Record<string, number>;
}

export type SubmitResult =
  | { ok: true; judgments: number }
  | { ok: false; status: number; reason: string };

/** Exactly the fields the service documents; anything else is a leak. */
const TASK_KEYS = ["task_id", "kind", "prompt", "source", "candidates", "verdicts"];
const SLOT_KEYS = ["A", "B"];

/**
 * Validate a served payload. Rejects unknown fields and unknown candidate
 * slots outright, so a payload that carried any system-identity data would
 * fail loudly instead of reaching the DOM.
 */
export function parseTask(raw: unknown): TaskPayload {
  if (typeof raw !== "object" || raw === null) {
    throw new Error("task payload is not an object");
  }
  const obj = raw as Record<string, unknown>;
  const extra = Object.keys(obj).filter((k) => !TASK_KEYS.includes(k));
  if (extra.length > 0) {
    throw new Error(`task payload has undocumented fields: ${extra.join(", ")}`);
  }
  for (const key of TASK_KEYS) {
    if (!(key in obj)) {
      throw new Error(`task payload is missing "${key}"`);
    }
  }
  if (obj.kind !== MEANING && obj.kind !== FLUENCY) {
    throw new Error(`unknown task kind ${JSON.stringify(obj.kind)}`);
  }
  for (const field of ["task_id", "prompt", "source"]) {
    if (typeof obj[field] !== "string") {
      throw new Error(`task field "${field}" is not a string`);
    }
  }
  const candidates = obj.candidates as Record<string, unknown>;
  if (typeof candidates !== "object" || candidates === null) {
    throw new Error("task candidates is not an object");
  }
  for (const [slot, text] of Object.entries(candidates)) {
    if (!SLOT_KEYS.includes(slot)) {
      throw new Error(`unknown candidate slot ${JSON.stringify(slot)}`);
    }
    if (typeof text !== "string") {
      throw new Error(`candidate ${slot} is not a string`);
    }
  }
  if (!Array.isArray(obj.verdicts) || obj.verdicts.length === 0) {
    throw new Error("task verdicts is not a non-empty array");
  }
  return obj as unknown as TaskPayload;
}

/** Client-side mirror of the server's verdict domain check. */
export function isAllowedVerdict(task: TaskPayload, verdict: Verdict): boolean {
  if (task.kind === FLUENCY) {
    return Number.isInteger(verdict) && (task.verdicts as number[]).includes(verdict as number);
  }
  return typeof verdict === "string" && (task.verdicts as string[]).includes(verdict);
}
