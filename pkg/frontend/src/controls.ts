import { FLUENCY, TaskPayload, Verdict } from "./types.js";

export interface VerdictControl {
  verdict: Verdict;
  /** Button face, e.g. "A", "=", "3". */
  label: string;
  /** Caption under the button; empty when the label speaks for itself. */
  caption: string;
}

export interface CandidateView {
  slot: string;
  text: string;
}

const MEANING_CAPTIONS: Record<string, string> = {
  "=": "no preference",
};

const FLUENCY_CAPTIONS: Record<number, string> = {
  1: "unreadable",
  4: "perfect",
};

/**
 * One control per verdict the server declared, in the server's order.
 * The endpoints of the fluency scale are captioned so annotators share
 * the same anchors; the meaning tie gets an explicit "no preference".
 */
export function verdictControls(task: TaskPayload): VerdictControl[] {
  return task.verdicts.map((verdict) => {
    const caption =
      task.kind === FLUENCY
        ? FLUENCY_CAPTIONS[verdict as number] ?? ""
        : MEANING_CAPTIONS[verdict as string] ?? "";
    return { verdict, label: String(verdict), caption };
  });
}

/** Candidates in payload key order, which is the order the server served. */
export function candidateViews(task: TaskPayload): CandidateView[] {
  return Object.entries(task.candidates).map(([slot, text]) => ({ slot, text }));
}
