/**
 * Golden-vector files: random token sequences plus float64 reference
 * logits, numbers serialized as decimal strings so no precision is lost
 * to JSON readers (JavaScript's shortest round-trip formatting parses
 * back to the identical double in any IEEE-754 environment).
 */

import { ModelConfig } from './config.js';
import { Mat, forward, ForwardTrace } from './forward.js';
import { TensorMap } from './pumaw1.js';
import { SplitMix64 } from './rng.js';

export interface GoldenCase {
    tokens: number[];
    logits: string[][];
    activations?: string[][][];
}

export interface GoldenFile {
    config: ModelConfig;
    cases: GoldenCase[];
}

function matToStrings(m: Mat): string[][] {
    const out: string[][] = [];
    for (let i = 0; i < m.rows; i++) {
        out.push(Array.from(m.row(i), (v) => String(v)));
    }
    return out;
}

export function genGolden(
    weights: TensorMap,
    config: ModelConfig,
    nCases: number,
    seed: number,
    withActivations = false,
): GoldenFile {
    const rng = new SplitMix64(seed);
    const cases: GoldenCase[] = [];
    for (let c = 0; c < nCases; c++) {
        const len = 2 + Number(rng.nextU64() % BigInt(config.max_seq_len - 1));
        const tokens = Array.from({ length: len }, () => Number(rng.nextU64() % BigInt(config.vocab_size)));
        const trace: ForwardTrace | undefined = withActivations ? { blocks: [] } : undefined;
        const logits = forward(tokens, weights, config, trace);
        const entry: GoldenCase = { tokens, logits: matToStrings(logits) };
        if (trace) {
            entry.activations = trace.blocks.map((block) => block.map((row) => Array.from(row, String)));
        }
        cases.push(entry);
    }
    return { config, cases };
}
