/** Wire types of the disambig HTTP API (canonical snake_case JSON). */

export type ResponseKind = "answer" | "clarification" | "answer_with_notice";

export interface OptionPayload {
  ref_id: string;
  kind: string;
}

export interface ClarificationOption {
  option_id: string;
  label: string;
  payload: OptionPayload;
}

export interface QueryResponse {
  kind: ResponseKind;
  trace_id: string;
  answer_text: string | null;
  question: string | null;
  options: ClarificationOption[];
}

export interface SessionTurn {
  role: "user" | "assistant";
  text: string;
  index: number;
}

export interface SessionPending {
  question: string;
  options: ClarificationOption[];
}

export interface SessionPayload {
  session_id: string;
  turns: SessionTurn[];
  pending: SessionPending | null;
}

export interface HealthPayload {
  status: string;
  store: Record<string, number>;
  backend: string;
}

export interface ErrorPayload {
  error: string;
  message: string;
  trace_id: string;
}
