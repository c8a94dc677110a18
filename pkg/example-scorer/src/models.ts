/**
 * Deliberately trivial scoring models. They exist to pin the protocol
 * down, not to model language: a real neural scorer would plug in at this
 * interface (a ranked token distribution per masked position).
 */

import { readFileSync } from "node:fs";

export interface ScorerModel {
  readonly vocabSize: number;
  /** Full distribution as [token, prob] pairs, best first, ties by lower id. */
  ranked(): [number, number][];
}

export class UniformModel implements ScorerModel {
  constructor(readonly vocabSize: number) {
    if (!Number.isInteger(vocabSize) || vocabSize < 2) {
      throw new Error(`vocab size must be an integer >= 2, got ${vocabSize}`);
    }
  }

  ranked(): [number, number][] {
    const p = 1 / this.vocabSize;
    return Array.from({ length: this.vocabSize }, (_, token) => [token, p]);
  }
}

export class UnigramModel implements ScorerModel {
  private readonly order: [number, number][];

  constructor(probs: number[]) {
    if (probs.length < 2 || probs.some((p) => !(p >= 0))) {
      throw new Error("unigram table needs >= 2 non-negative probabilities");
    }
    const total = probs.reduce((a, b) => a + b, 0);
    if (total <= 0) {
      throw new Error("unigram table has no mass");
    }
    this.order = probs
      .map((p, token): [number, number] => [token, p / total])
      .sort((a, b) => b[1] - a[1] || a[0] - b[0]);
  }

  get vocabSize(): number {
    return this.order.length;
  }

  ranked(): [number, number][] {
    return this.order.map(([t, p]) => [t, p]);
  }
}

/** Load a unigram table from a JSON file of the form {"probs": [..]}. */
export function loadUnigramTable(path: string): UnigramModel {
  const payload = JSON.parse(readFileSync(path, "utf-8"));
  if (!payload || !Array.isArray(payload.probs)) {
    throw new Error(`table file ${path} must hold {"probs": [...]}`);
  }
  return new UnigramModel(payload.probs.map(Number));
}
