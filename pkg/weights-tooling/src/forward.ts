/**
 * Float64 reference forward pass.
 *
 * Mirrors the secure engine's semantics exactly: the piecewise GeLU
 * polynomial with codec-quantized breakpoints, the clipped-Taylor softmax
 * (t = 10, epsilon = one 18-bit ulp, clip at -14), standard LayerNorm with
 * 1e-5, the -30 additive causal bias, and optional 1/sqrt(head_dim)
 * scaling. Golden vectors produced here must agree with the engine's own
 * float reference to 1e-9.
 */

import { ModelConfig, headDim } from './config.js';
import { CONFIG_TENSOR, TensorMap } from './pumaw1.js';

export const MASK_CONSTANT = -30.0;
const FRAC_SCALE = 2 ** 18;
const SOFTMAX_EPS = 2 ** -18;
const SOFTMAX_T = 1024; // 2^10 Taylor iterations
const SOFTMAX_CLIP = -14.0;
const LN_EPS = 1e-5;

// piecewise GeLU: 0 | cubic | even sextic + x/2 | identity
const F0 = [-0.011034134030615728, -0.11807612951181953, -0.42226581151983866, -0.5054031199708174];
const F1 = [0.0018067462606141187, -0.037688200365904236, 0.3603292692789629, 0.5, 0.008526321541038084];
const BREAKS = [-4.0, -1.95, 3.0].map((b) => Math.round(b * FRAC_SCALE) / FRAC_SCALE);

export function geluPiecewise(x: number): number {
    if (x < BREAKS[0]) return 0.0;
    if (x < BREAKS[1]) return ((F0[0] * x + F0[1]) * x + F0[2]) * x + F0[3];
    if (x <= BREAKS[2]) {
        const xx = x * x;
        return ((F1[0] * xx + F1[1]) * xx + F1[2]) * xx + F1[3] * x + F1[4];
    }
    return x;
}

/** Clipped-Taylor softmax over a row, matching the secure protocol. */
export function softmaxClipped(row: Float64Array): Float64Array {
    let m = -Infinity;
    for (const v of row) m = Math.max(m, v);
    const xh = row.map((v) => v - m - SOFTMAX_EPS);
    const z = xh.map((v) => Math.pow(1 + v / SOFTMAX_T, SOFTMAX_T));
    let sum = 0;
    for (const v of z) sum += v;
    const out = new Float64Array(row.length);
    for (let i = 0; i < row.length; i++) {
        out[i] = xh[i] < SOFTMAX_CLIP ? 0.0 : z[i] / sum;
    }
    return out;
}

export function layernormRow(
    row: Float64Array,
    gamma: Float64Array | Float32Array,
    beta: Float64Array | Float32Array,
): Float64Array {
    const n = row.length;
    let mu = 0;
    for (const v of row) mu += v;
    mu /= n;
    let sigma = 0;
    for (const v of row) sigma += (v - mu) * (v - mu);
    const s = 1 / Math.sqrt(sigma / n + LN_EPS);
    const out = new Float64Array(n);
    for (let i = 0; i < n; i++) out[i] = gamma[i] * (row[i] - mu) * s + beta[i];
    return out;
}

/** Row-major (rows x cols) float64 matrix. */
export class Mat {
    constructor(
        public rows: number,
        public cols: number,
        public data: Float64Array = new Float64Array(rows * cols),
    ) {}

    static from(rows: number, cols: number, src: ArrayLike<number>): Mat {
        return new Mat(rows, cols, Float64Array.from(src as Float64Array));
    }

    get(i: number, j: number): number {
        return this.data[i * this.cols + j];
    }

    set(i: number, j: number, v: number): void {
        this.data[i * this.cols + j] = v;
    }

    row(i: number): Float64Array {
        return this.data.subarray(i * this.cols, (i + 1) * this.cols);
    }

    matmul(other: Mat): Mat {
        if (this.cols !== other.rows) {
            throw new Error(`shape mismatch: ${this.rows}x${this.cols} @ ${other.rows}x${other.cols}`);
        }
        const out = new Mat(this.rows, other.cols);
        for (let i = 0; i < this.rows; i++) {
            for (let k = 0; k < this.cols; k++) {
                const a = this.get(i, k);
                for (let j = 0; j < other.cols; j++) {
                    out.data[i * out.cols + j] += a * other.get(k, j);
                }
            }
        }
        return out;
    }

    matmulT(other: Mat): Mat {
        // this @ other^T
        const out = new Mat(this.rows, other.rows);
        for (let i = 0; i < this.rows; i++) {
            for (let j = 0; j < other.rows; j++) {
                let acc = 0;
                for (let k = 0; k < this.cols; k++) acc += this.get(i, k) * other.get(j, k);
                out.set(i, j, acc);
            }
        }
        return out;
    }
}

function weightMat(weights: TensorMap, name: string): Mat {
    const t = weights.get(name);
    if (!t) throw new Error(`missing tensor ${name}`);
    const rows = t.shape.length === 2 ? t.shape[0] : 1;
    const cols = t.shape[t.shape.length - 1];
    return Mat.from(rows, cols, t.data);
}

export interface ForwardTrace {
    blocks: Float64Array[][];
}

/** Logits (s x vocab) for a token sequence. */
export function forward(
    tokens: number[],
    weights: TensorMap,
    config: ModelConfig,
    trace?: ForwardTrace,
): Mat {
    const s = tokens.length;
    if (s > config.max_seq_len) {
        throw new Error(`sequence length ${s} exceeds max_seq_len ${config.max_seq_len}`);
    }
    for (const t of tokens) {
        if (!Number.isInteger(t) || t < 0 || t >= config.vocab_size) {
            throw new Error(`token id ${t} out of range [0, ${config.vocab_size})`);
        }
    }
    const dh = headDim(config);
    const scale = config.attn_scale ? 1 / Math.sqrt(dh) : 1.0;
    const tok = weightMat(weights, 'token_embedding');
    const pos = weightMat(weights, 'position_embedding');

    let h = new Mat(s, config.d_model);
    for (let i = 0; i < s; i++) {
        for (let j = 0; j < config.d_model; j++) {
            h.set(i, j, tok.get(tokens[i], j) + pos.get(i, j));
        }
    }

    const vec = (name: string): Float32Array => {
        const t = weights.get(name);
        if (!t) throw new Error(`missing tensor ${name}`);
        return t.data;
    };

    const mha = (x: Mat, p: string): Mat => {
        const q = x.matmul(weightMat(weights, p + 'attn.wq'));
        const k = x.matmul(weightMat(weights, p + 'attn.wk'));
        const v = x.matmul(weightMat(weights, p + 'attn.wv'));
        const merged = new Mat(s, config.d_model);
        for (let head = 0; head < config.n_heads; head++) {
            const off = head * dh;
            const slice = (m: Mat): Mat => {
                const out = new Mat(s, dh);
                for (let i = 0; i < s; i++) for (let j = 0; j < dh; j++) out.set(i, j, m.get(i, off + j));
                return out;
            };
            const qh = slice(q);
            const kh = slice(k);
            const vh = slice(v);
            const scores = qh.matmulT(kh);
            for (let i = 0; i < s; i++) {
                for (let j = 0; j < s; j++) {
                    scores.set(i, j, scores.get(i, j) * scale + (j > i ? MASK_CONSTANT : 0));
                }
            }
            for (let i = 0; i < s; i++) {
                const probs = softmaxClipped(scores.row(i));
                for (let j = 0; j < dh; j++) {
                    let acc = 0;
                    for (let t = 0; t < s; t++) acc += probs[t] * vh.get(t, j);
                    merged.set(i, off + j, acc);
                }
            }
        }
        return merged.matmul(weightMat(weights, p + 'attn.wo'));
    };

    const ffn = (x: Mat, p: string): Mat => {
        const h1 = x.matmul(weightMat(weights, p + 'ffn.w1'));
        const b1 = vec(p + 'ffn.b1');
        for (let i = 0; i < h1.data.length; i++) {
            h1.data[i] = geluPiecewise(h1.data[i] + b1[i % h1.cols]);
        }
        const h2 = h1.matmul(weightMat(weights, p + 'ffn.w2'));
        const b2 = vec(p + 'ffn.b2');
        for (let i = 0; i < h2.data.length; i++) h2.data[i] += b2[i % h2.cols];
        return h2;
    };

    const lnRows = (x: Mat, g: Float32Array, b: Float32Array): Mat => {
        const out = new Mat(x.rows, x.cols);
        for (let i = 0; i < x.rows; i++) out.data.set(layernormRow(x.row(i), g, b), i * x.cols);
        return out;
    };

    const add = (a: Mat, b: Mat): Mat => {
        const out = new Mat(a.rows, a.cols);
        for (let i = 0; i < a.data.length; i++) out.data[i] = a.data[i] + b.data[i];
        return out;
    };

    for (let layer = 0; layer < config.n_layers; layer++) {
        const p = `layers.${layer}.`;
        if (config.norm_placement === 'post') {
            h = lnRows(add(h, mha(h, p)), vec(p + 'ln1.gamma'), vec(p + 'ln1.beta'));
            h = lnRows(add(h, ffn(h, p)), vec(p + 'ln2.gamma'), vec(p + 'ln2.beta'));
        } else {
            h = add(h, mha(lnRows(h, vec(p + 'ln1.gamma'), vec(p + 'ln1.beta')), p));
            h = add(h, ffn(lnRows(h, vec(p + 'ln2.gamma'), vec(p + 'ln2.beta')), p));
        }
        if (trace) {
            trace.blocks.push(Array.from({ length: s }, (_, i) => Float64Array.from(h.row(i))));
        }
    }
    h = lnRows(h, vec('final_ln.gamma'), vec('final_ln.beta'));
    return h.matmulT(weightMat(weights, 'lm_head'));
}

export function stripConfig(weights: TensorMap): TensorMap {
    const out = new Map(weights);
    out.delete(CONFIG_TENSOR);
    return out;
}
