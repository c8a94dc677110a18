import * as readline from "node:readline";

import type { ScorerModel } from "./models.js";
import {
  ErrorResponse,
  Handshake,
  PROTO_NAME,
  PROTO_VERSION,
  RequestError,
  ScoreRequest,
  ScoreResponse,
  parseRequest,
} from "./protocol.js";

export type WriteLine = (line: string) => void;

export function handshake(model: ScorerModel): Handshake {
  return { proto: PROTO_NAME, version: PROTO_VERSION, vocab_size: model.vocabSize };
}

/** Score one request: distributions for exactly the masked (null) positions. */
export function respond(model: ScorerModel, request: ScoreRequest): ScoreResponse {
  for (const token of request.tgt) {
    if (token !== null && (token < 0 || token >= model.vocabSize)) {
      throw new RequestError(`observed token ${token} outside vocabulary`, request.id);
    }
  }
  const k = Math.min(request.topk, model.vocabSize);
  const dist = model.ranked().slice(0, k);
  const preds = request.tgt.flatMap((token, pos) =>
    token === null ? [{ pos, dist }] : [],
  );
  return { id: request.id, preds };
}

export function handleLine(model: ScorerModel, line: string, write: WriteLine): void {
  if (!line.trim()) {
    return;
  }
  try {
    write(JSON.stringify(respond(model, parseRequest(line))));
  } catch (err) {
    const failure: ErrorResponse = {
      id: err instanceof RequestError ? err.id : null,
      error: err instanceof Error ? err.message : String(err),
    };
    write(JSON.stringify(failure));
  }
}

/** Single-threaded request loop: runs until the input stream closes. */
export async function serve(
  model: ScorerModel,
  input: NodeJS.ReadableStream,
  write: WriteLine,
): Promise<void> {
  write(JSON.stringify(handshake(model)));
  for await (const line of readline.createInterface({ input })) {
    handleLine(model, line, write);
  }
}
