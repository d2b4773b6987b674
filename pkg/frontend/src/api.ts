import {
  FinalOutcome,
  FinalOutcomeSchema,
  MessageOutcome,
  MessageOutcomeSchema,
  NextCase,
  NextCaseSchema,
  RunProgress,
  RunProgressSchema,
  SurveyAck,
  SurveyAckSchema,
  SurveyDefinition,
  SurveyDefinitionSchema,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit
) => Promise<Response>;

export interface StudyApiOptions {
  baseUrl: string;
  token?: string;
  fetchImpl?: FetchLike;
}

/**
 * Thin typed client over the study service HTTP API.
 *
 * Responses are read to completion before parsing, so bodies that arrive in
 * several chunks (streaming transports, proxies that re-frame) behave the
 * same as single-frame ones. Every payload is validated and stripped down to
 * the declared schema.
 */
export class StudyApi {
  private readonly baseUrl: string;
  private readonly token: string | undefined;
  private readonly fetchImpl: FetchLike;

  constructor(options: StudyApiOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, "");
    this.token = options.token;
    this.fetchImpl =
      options.fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request(
    method: string,
    path: string,
    body?: unknown
  ): Promise<unknown> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["content-type"] = "application/json";
    if (this.token !== undefined) headers["x-study-token"] = this.token;
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    // text() drains the body stream fully, chunked or not
    const raw = await response.text();
    let parsed: unknown = null;
    if (raw.length > 0) {
      try {
        parsed = JSON.parse(raw);
      } catch {
        parsed = raw;
      }
    }
    if (!response.ok) {
      const detail =
        typeof parsed === "object" && parsed !== null && "detail" in parsed
          ? String((parsed as { detail: unknown }).detail)
          : String(parsed ?? response.statusText);
      throw new ApiError(response.status, detail);
    }
    return parsed;
  }

  async createRun(
    planId: string,
    participantId: string,
    expertise: string
  ): Promise<RunProgress> {
    const data = await this.request("POST", "/runs", {
      plan_id: planId,
      participant_id: participantId,
      expertise,
    });
    return RunProgressSchema.parse(data);
  }

  async nextCase(runId: string): Promise<NextCase> {
    const data = await this.request(
      "GET",
      `/runs/${encodeURIComponent(runId)}/next`
    );
    return NextCaseSchema.parse(data);
  }

  async sendMessage(
    encounterId: string,
    text: string
  ): Promise<MessageOutcome> {
    const data = await this.request(
      "POST",
      `/encounters/${encodeURIComponent(encounterId)}/message`,
      { text }
    );
    return MessageOutcomeSchema.parse(data);
  }

  async submitFinal(encounterId: string, text: string): Promise<FinalOutcome> {
    const data = await this.request(
      "POST",
      `/encounters/${encodeURIComponent(encounterId)}/final`,
      { text }
    );
    return FinalOutcomeSchema.parse(data);
  }

  async getSurvey(runId: string): Promise<SurveyDefinition> {
    const data = await this.request(
      "GET",
      `/runs/${encodeURIComponent(runId)}/survey`
    );
    return SurveyDefinitionSchema.parse(data);
  }

  async submitSurvey(
    runId: string,
    likert: Record<string, number>,
    freeText: Record<string, string>
  ): Promise<SurveyAck> {
    const data = await this.request(
      "POST",
      `/runs/${encodeURIComponent(runId)}/survey`,
      { likert, free_text: freeText }
    );
    return SurveyAckSchema.parse(data);
  }
}
