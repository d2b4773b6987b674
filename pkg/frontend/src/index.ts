export { ApiError, StudyApi } from "./api";
export type { FetchLike, StudyApiOptions } from "./api";
export {
  ConsoleController,
  ConsoleError,
} from "./controller";
export type { CaseView, ChatEntry, Phase, SurveyForm } from "./controller";
export { composeFinal, isExit, isFinalAnswer } from "./protocol";
export * from "./types";
