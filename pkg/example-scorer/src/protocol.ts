/**
 * Wire protocol: newline-delimited JSON over stdin/stdout.
 *
 * The first line emitted is the handshake; afterwards every request line
 * is answered with exactly one response line, in request order. `null`
 * entries in `tgt` mark masked positions; probabilities are linear.
 */

export const PROTO_NAME = "cmlm-scorer";
export const PROTO_VERSION = 1;

export interface Handshake {
  proto: typeof PROTO_NAME;
  version: typeof PROTO_VERSION;
  vocab_size: number;
}

export interface ScoreRequest {
  id: number;
  src: number[];
  tgt: (number | null)[];
  n: number;
  topk: number;
}

export interface PositionPrediction {
  pos: number;
  /** [token id, probability] pairs, highest probability first. */
  dist: [number, number][];
}

export interface ScoreResponse {
  id: number;
  preds: PositionPrediction[];
}

export interface ErrorResponse {
  id: number | null;
  error: string;
}

export class RequestError extends Error {
  constructor(message: string, readonly id: number | null = null) {
    super(message);
  }
}

function isInt(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value);
}

/** Parse and validate one request line; throws RequestError with the id when recoverable. */
export function parseRequest(line: string): ScoreRequest {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new RequestError(`malformed JSON: ${line.trim()}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new RequestError("request must be a JSON object");
  }
  const msg = raw as Record<string, unknown>;
  const id = isInt(msg.id) ? (msg.id as number) : null;
  if (id === null) {
    throw new RequestError("request lacks an integer id");
  }
  if (!Array.isArray(msg.src) || msg.src.length === 0 || !msg.src.every(isInt)) {
    throw new RequestError("src must be a non-empty integer array", id);
  }
  if (!isInt(msg.n) || (msg.n as number) < 1) {
    throw new RequestError("n must be a positive integer", id);
  }
  const tgt = msg.tgt;
  if (!Array.isArray(tgt) || tgt.length !== msg.n) {
    throw new RequestError("tgt must be an array of length n", id);
  }
  if (!tgt.every((t) => t === null || isInt(t))) {
    throw new RequestError("tgt entries must be token ids or null", id);
  }
  if (!isInt(msg.topk) || (msg.topk as number) < 1) {
    throw new RequestError("topk must be a positive integer", id);
  }
  return {
    id,
    src: msg.src as number[],
    tgt: tgt as (number | null)[],
    n: msg.n as number,
    topk: msg.topk as number,
  };
}
