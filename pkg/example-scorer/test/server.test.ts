import assert from "node:assert/strict";
import { once } from "node:events";
import { createInterface } from "node:readline";
import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { test } from "node:test";
import type { Readable, Writable } from "node:stream";

import { UniformModel, UnigramModel } from "../src/models.js";
import { handshake, respond } from "../src/server.js";
import { parseRequest, RequestError } from "../src/protocol.js";

const MAIN = join(dirname(fileURLToPath(import.meta.url)), "..", "src", "main.js");

class Client {
  private readonly proc: ChildProcess;
  private readonly stdin: Writable;
  private readonly lines: AsyncIterator<string>;

  constructor(args: string[]) {
    this.proc = spawn("node", [MAIN, ...args], { stdio: ["pipe", "pipe", "inherit"] });
    this.stdin = this.proc.stdin as Writable;
    this.lines = createInterface({ input: this.proc.stdout as Readable })[Symbol.asyncIterator]();
  }

  async read(): Promise<any> {
    const item = await this.lines.next();
    assert.ok(!item.done, "server closed its output early");
    return JSON.parse(item.value);
  }

  send(payload: unknown): void {
    const line = typeof payload === "string" ? payload : JSON.stringify(payload);
    this.stdin.write(line + "\n");
  }

  async close(): Promise<number> {
    this.stdin.end();
    const [code] = (await once(this.proc, "exit")) as [number];
    return code;
  }
}

function request(id: number, tgt: (number | null)[], topk = 8) {
  return { id, src: [1, 2, 3], tgt, n: tgt.length, topk };
}

test("handshake is the first line and carries the vocab size", async () => {
  const client = new Client(["--model", "uniform", "--vocab-size", "4"]);
  assert.deepEqual(await client.read(), { proto: "cmlm-scorer", version: 1, vocab_size: 4 });
  assert.equal(await client.close(), 0);
});

test("uniform model answers nulls only, 1/V each", async () => {
  const client = new Client(["--model", "uniform", "--vocab-size", "4"]);
  await client.read();
  client.send(request(0, [null, 2, null], 4));
  const response = await client.read();
  assert.equal(response.id, 0);
  assert.deepEqual(
    response.preds.map((p: any) => p.pos),
    [0, 2],
  );
  for (const pred of response.preds) {
    assert.deepEqual(pred.dist, [[0, 0.25], [1, 0.25], [2, 0.25], [3, 0.25]]);
  }
  await client.close();
});

test("topk truncates the distribution", async () => {
  const client = new Client(["--model", "uniform", "--vocab-size", "4"]);
  await client.read();
  client.send(request(5, [null], 2));
  const response = await client.read();
  assert.deepEqual(response.preds[0].dist, [[0, 0.25], [1, 0.25]]);
  await client.close();
});

test("unigram model ranks by probability with ties toward lower ids", async () => {
  const dir = mkdtempSync(join(tmpdir(), "scorer-"));
  const table = join(dir, "table.json");
  writeFileSync(table, JSON.stringify({ probs: [0.2, 0.4, 0.2, 0.2] }));
  const client = new Client(["--model", "unigram", "--table", table]);
  const hello = await client.read();
  assert.equal(hello.vocab_size, 4);
  client.send(request(1, [null], 8));
  const response = await client.read();
  assert.deepEqual(
    response.preds[0].dist.map(([t]: [number, number]) => t),
    [1, 0, 2, 3],
  );
  assert.ok(Math.abs(response.preds[0].dist[0][1] - 0.4) < 1e-12);
  await client.close();
});

test("malformed lines get an error response and the loop continues", async () => {
  const client = new Client(["--model", "uniform", "--vocab-size", "4"]);
  await client.read();
  client.send("this is not json");
  const failure = await client.read();
  assert.equal(failure.id, null);
  assert.match(failure.error, /malformed JSON/);
  client.send(request(7, [null]));
  const ok = await client.read();
  assert.equal(ok.id, 7);
  await client.close();
});

test("invalid requests keep their id in the error response", async () => {
  const client = new Client(["--model", "uniform", "--vocab-size", "4"]);
  await client.read();
  client.send({ id: 9, src: [1], tgt: [null, 9], n: 2, topk: 4 });
  const failure = await client.read();
  assert.equal(failure.id, 9);
  assert.match(failure.error, /outside vocabulary/);
  await client.close();
});

test("responses come back in request order", async () => {
  const client = new Client(["--model", "uniform", "--vocab-size", "4"]);
  await client.read();
  for (let id = 0; id < 5; id += 1) {
    client.send(request(id, [null, null]));
  }
  for (let id = 0; id < 5; id += 1) {
    const response = await client.read();
    assert.equal(response.id, id);
  }
  await client.close();
});

test("every request is answered exactly once", async () => {
  const client = new Client(["--model", "uniform", "--vocab-size", "4"]);
  await client.read();
  client.send(request(0, [null]));
  client.send(request(1, [0]));
  const first = await client.read();
  const second = await client.read();
  assert.equal(first.id, 0);
  assert.equal(second.id, 1);
  assert.deepEqual(second.preds, []);
  assert.equal(await client.close(), 0);
});

test("respond and parseRequest agree without a child process", () => {
  const model = new UniformModel(4);
  assert.equal(handshake(model).vocab_size, 4);
  const parsed = parseRequest(JSON.stringify(request(3, [null, 1])));
  const response = respond(model, parsed);
  assert.equal(response.preds.length, 1);
  assert.equal(response.preds[0].pos, 0);
  assert.throws(() => parseRequest('{"id": "x"}'), RequestError);
  assert.throws(
    () => respond(model, parseRequest(JSON.stringify(request(4, [99])))),
    RequestError,
  );
});

test("unigram table must hold usable mass", () => {
  assert.throws(() => new UnigramModel([0, 0]));
  assert.throws(() => new UnigramModel([1]));
});
