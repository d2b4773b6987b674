// Mirrors the turn grammar the service enforces so the console can gate
// input locally instead of bouncing obvious mistakes off the server.

export const FINAL_PREFIXES = ["final answer:", "final diagnosis:"] as const;
export const EXIT_COMMAND = "exit";

export function isFinalAnswer(text: string): boolean {
  const lowered = text.trimStart().toLowerCase();
  return FINAL_PREFIXES.some((prefix) => lowered.startsWith(prefix));
}

export function isExit(text: string): boolean {
  return text.trim().toLowerCase() === EXIT_COMMAND;
}

/** Protocol form of a final submission: chips joined with "; ". */
export function composeFinal(chips: readonly string[]): string {
  return "final answer: " + chips.join("; ");
}
