import { ApiError, StudyApi } from "./api";
import { composeFinal, isExit, isFinalAnswer } from "./protocol";
import { Condition, OpenCase, SurveyDefinition, Turn } from "./types";

export class ConsoleError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConsoleError";
  }
}

export type Phase =
  | "idle"
  | "case"
  | "session-complete"
  | "survey"
  | "done";

export interface ChatEntry {
  role: Turn["role"];
  text: string;
  // true while the turn is shown optimistically, before the server ack
  pending: boolean;
}

export interface SurveyForm {
  definition: SurveyDefinition;
  likert: Record<string, number | null>;
  freeText: Record<string, string>;
}

export interface CaseView {
  heading: string;
  condition: Condition;
  caseText: string;
  instructions: string;
  chatEnabled: boolean;
  chatPlaceholder: string;
  elapsed: string;
}

const BASELINE_PLACEHOLDER =
  "There is no AI support in this session. Type a final answer " +
  '("final answer: Dx 1; Dx 2") or "exit".';
const INTERACTIVE_PLACEHOLDER = "Ask the assistant about this patient.";

/**
 * State machine behind the physician console.
 *
 * Holds one active encounter at a time. Sent turns render optimistically and
 * are rolled back if the server rejects them; after a final answer the next
 * case loads automatically, and once the plan is exhausted the session ends
 * with the feedback survey. Reference diagnoses never enter this state: the
 * response schemas have no field for them.
 */
export class ConsoleController {
  phase: Phase = "idle";
  runId = "";
  sessionId = "";
  condition: Condition = "interactive";
  currentCase = 0;
  totalCases = 0;
  completedCases = 0;
  aborted = false;
  encounterId = "";
  caseId = "";
  caseText = "";
  instructions = "";
  transcript: ChatEntry[] = [];
  chips: string[] = [];
  survey: SurveyForm | null = null;
  lastError = "";
  busy = false;

  private caseStartedAt = 0;
  private nowMs = 0;

  constructor(
    private readonly api: StudyApi,
    private readonly clock: () => number = Date.now
  ) {}

  // -- session -------------------------------------------------------------

  async start(
    planId: string,
    participantId: string,
    expertise: string
  ): Promise<void> {
    const progress = await this.api.createRun(planId, participantId, expertise);
    this.runId = progress.run_id;
    this.sessionId = progress.session_id;
    this.condition = progress.condition;
    this.totalCases = progress.total;
    this.completedCases = progress.completed;
    this.aborted = progress.aborted;
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    const next = await this.api.nextCase(this.runId);
    if (next.done) {
      this.completedCases = next.progress.completed;
      this.aborted = next.progress.aborted;
      this.encounterId = "";
      this.caseText = "";
      this.transcript = [];
      this.chips = [];
      this.phase = this.aborted ? "done" : "session-complete";
      return;
    }
    this.enterCase(next);
  }

  private enterCase(next: OpenCase): void {
    this.encounterId = next.encounter_id;
    this.caseId = next.case_id;
    this.condition = next.condition;
    this.caseText = next.case_text;
    this.instructions = next.instructions;
    this.completedCases = next.progress.completed;
    this.totalCases = next.progress.total;
    this.currentCase = next.progress.current;
    // server-side turns win: resuming an interrupted encounter replays them
    this.transcript = next.turns.map((t) => ({
      role: t.role,
      text: t.text,
      pending: false,
    }));
    this.chips = [];
    this.caseStartedAt = this.clock();
    this.nowMs = this.caseStartedAt;
    this.lastError = "";
    this.phase = "case";
  }

  // -- case view -----------------------------------------------------------

  renderCase(): CaseView {
    this.requirePhase("case", "no active case to render");
    const interactive = this.condition === "interactive";
    return {
      heading: `Case ${this.currentCase} of ${this.totalCases}`,
      condition: this.condition,
      caseText: this.caseText,
      instructions: this.instructions,
      chatEnabled: interactive,
      chatPlaceholder: interactive
        ? INTERACTIVE_PLACEHOLDER
        : BASELINE_PLACEHOLDER,
      elapsed: this.elapsedDisplay,
    };
  }

  tick(nowMs?: number): void {
    this.nowMs = nowMs ?? this.clock();
  }

  get elapsedDisplay(): string {
    const seconds = Math.max(
      0,
      Math.floor((this.nowMs - this.caseStartedAt) / 1000)
    );
    const mm = String(Math.floor(seconds / 60)).padStart(2, "0");
    const ss = String(seconds % 60).padStart(2, "0");
    return `${mm}:${ss}`;
  }

  // -- chat ----------------------------------------------------------------

  async sendMessage(text: string): Promise<"reply" | "final" | "exit"> {
    this.requirePhase("case", "no active case");
    const trimmed = text.trim();
    if (!trimmed) throw new ConsoleError("empty message");
    if (
      this.condition === "baseline" &&
      !isFinalAnswer(trimmed) &&
      !isExit(trimmed)
    ) {
      throw new ConsoleError(
        "chat is disabled in this session: submit a final answer or exit"
      );
    }
    const optimistic: ChatEntry = {
      role: "physician",
      text: trimmed,
      pending: true,
    };
    this.transcript.push(optimistic);
    this.busy = true;
    try {
      const outcome = await this.api.sendMessage(this.encounterId, trimmed);
      optimistic.pending = false;
      if (outcome.kind === "reply") {
        this.transcript.push({
          role: "assistant",
          text: outcome.text,
          pending: false,
        });
        return "reply";
      }
      if (outcome.kind === "final") {
        await this.loadNext();
        return "final";
      }
      this.aborted = true;
      this.phase = "done";
      return "exit";
    } catch (err) {
      // reconcile: the server never saw (or refused) this turn
      const at = this.transcript.indexOf(optimistic);
      if (at >= 0) this.transcript.splice(at, 1);
      this.lastError = err instanceof Error ? err.message : String(err);
      throw err;
    } finally {
      this.busy = false;
    }
  }

  // -- final answer --------------------------------------------------------

  addChip(text: string): void {
    const trimmed = text.trim();
    if (!trimmed) throw new ConsoleError("empty diagnosis");
    if (trimmed.includes(";"))
      throw new ConsoleError('diagnosis may not contain ";"');
    this.chips.push(trimmed);
  }

  removeChip(index: number): void {
    if (index < 0 || index >= this.chips.length)
      throw new ConsoleError(`no chip at ${index}`);
    this.chips.splice(index, 1);
  }

  get canSubmitFinal(): boolean {
    return this.phase === "case" && this.chips.length > 0 && !this.busy;
  }

  composedFinal(): string {
    return composeFinal(this.chips);
  }

  async submitFinal(): Promise<void> {
    if (this.phase !== "case") throw new ConsoleError("no active case");
    if (this.chips.length === 0)
      throw new ConsoleError("add at least one diagnosis before submitting");
    if (this.busy) throw new ConsoleError("another request is in flight");
    this.busy = true;
    try {
      await this.api.submitFinal(this.encounterId, this.composedFinal());
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      throw err;
    } finally {
      this.busy = false;
    }
    // submission is irrevocable; the next patient loads right away
    await this.loadNext();
  }

  // -- survey --------------------------------------------------------------

  get canEndSession(): boolean {
    return this.phase === "session-complete";
  }

  async endSession(): Promise<void> {
    this.requirePhase("session-complete", "cases are still in progress");
    const definition = await this.api.getSurvey(this.runId);
    const likert: Record<string, number | null> = {};
    for (const item of definition.likert_items) likert[item.key] = null;
    const freeText: Record<string, string> = {};
    this.survey = { definition, likert, freeText };
    this.phase = "survey";
  }

  answerLikert(key: string, value: number): void {
    const survey = this.requireSurvey();
    if (!(key in survey.likert))
      throw new ConsoleError(`unknown survey item ${key}`);
    const { min, max } = survey.definition.scale;
    if (!Number.isInteger(value) || value < min || value > max)
      throw new ConsoleError(`answer must be an integer in ${min}..${max}`);
    survey.likert[key] = value;
  }

  answerFreeText(key: string, text: string): void {
    const survey = this.requireSurvey();
    survey.freeText[key] = text;
  }

  get unansweredItems(): string[] {
    if (this.survey === null) return [];
    return Object.entries(this.survey.likert)
      .filter(([, v]) => v === null)
      .map(([k]) => k);
  }

  get surveyComplete(): boolean {
    return this.survey !== null && this.unansweredItems.length === 0;
  }

  async submitSurvey(): Promise<void> {
    const survey = this.requireSurvey();
    const missing = this.unansweredItems;
    if (missing.length > 0)
      throw new ConsoleError(
        `survey incomplete, unanswered: ${missing.join(", ")}`
      );
    const likert: Record<string, number> = {};
    for (const [k, v] of Object.entries(survey.likert)) likert[k] = v as number;
    await this.api.submitSurvey(this.runId, likert, { ...survey.freeText });
    this.phase = "done";
  }

  // -- helpers ---------------------------------------------------------------

  private requirePhase(phase: Phase, message: string): void {
    if (this.phase !== phase) throw new ConsoleError(message);
  }

  private requireSurvey(): SurveyForm {
    if (this.phase !== "survey" || this.survey === null)
      throw new ConsoleError("survey is not open");
    return this.survey;
  }
}

export { ApiError };
