import { z } from "zod";

// Response schemas for the study service. Parsing strips any key not listed
// here, so nothing the server might over-share (reference diagnoses above
// all) can ever reach console state.

export const ConditionSchema = z.enum(["baseline", "interactive"]);
export type Condition = z.infer<typeof ConditionSchema>;

export const RunProgressSchema = z.object({
  run_id: z.string(),
  session_id: z.string(),
  condition: ConditionSchema,
  completed: z.number().int().nonnegative(),
  total: z.number().int().positive(),
  aborted: z.boolean(),
});
export type RunProgress = z.infer<typeof RunProgressSchema>;

export const TurnSchema = z.object({
  role: z.enum(["physician", "assistant", "system"]),
  text: z.string(),
});
export type Turn = z.infer<typeof TurnSchema>;

const CaseProgressSchema = RunProgressSchema.extend({
  current: z.number().int().positive(),
});

export const NextCaseSchema = z.discriminatedUnion("done", [
  z.object({
    done: z.literal(true),
    progress: RunProgressSchema,
  }),
  z.object({
    done: z.literal(false),
    encounter_id: z.string(),
    case_id: z.string(),
    condition: ConditionSchema,
    case_text: z.string(),
    instructions: z.string(),
    turns: z.array(TurnSchema),
    progress: CaseProgressSchema,
  }),
]);
export type NextCase = z.infer<typeof NextCaseSchema>;
export type OpenCase = Extract<NextCase, { done: false }>;

export const MessageOutcomeSchema = z.discriminatedUnion("kind", [
  z.object({ kind: z.literal("reply"), text: z.string() }),
  z.object({ kind: z.literal("final"), diagnoses: z.array(z.string()) }),
  z.object({ kind: z.literal("exit") }),
]);
export type MessageOutcome = z.infer<typeof MessageOutcomeSchema>;

export const FinalOutcomeSchema = z.object({
  kind: z.literal("final"),
  diagnoses: z.array(z.string()),
});
export type FinalOutcome = z.infer<typeof FinalOutcomeSchema>;

export const SurveyDefinitionSchema = z.object({
  title: z.string(),
  intro: z.string().default(""),
  scale: z.object({
    min: z.number().int(),
    max: z.number().int(),
    min_label: z.string().default(""),
    max_label: z.string().default(""),
  }),
  likert_items: z.array(
    z.object({ key: z.string(), label: z.string(), text: z.string() })
  ),
  open_questions: z.array(z.object({ key: z.string(), text: z.string() })),
  per_item_explanation: z.string().default(""),
});
export type SurveyDefinition = z.infer<typeof SurveyDefinitionSchema>;

export const SurveyAckSchema = z.object({
  accepted: z.boolean(),
  run_id: z.string(),
});
export type SurveyAck = z.infer<typeof SurveyAckSchema>;
