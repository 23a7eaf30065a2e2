/**
 * Checkpoint conversion: rename tensors from the supported alias scheme
 * into the canonical layout. Anything outside the documented mapping is a
 * hard error; shapes are validated against the embedded config.
 *
 * Supported aliases (GPT-style checkpoint dumps):
 *   wte                      -> token_embedding
 *   wpe                      -> position_embedding
 *   h.{i}.attn.{q,k,v,o}     -> layers.{i}.attn.w{q,k,v,o}
 *   h.{i}.mlp.fc_in.{w,b}    -> layers.{i}.ffn.{w1,b1}
 *   h.{i}.mlp.fc_out.{w,b}   -> layers.{i}.ffn.{w2,b2}
 *   h.{i}.ln_1.{g,b}         -> layers.{i}.ln1.{gamma,beta}
 *   h.{i}.ln_2.{g,b}         -> layers.{i}.ln2.{gamma,beta}
 *   ln_f.{g,b}               -> final_ln.{gamma,beta}
 *   head                     -> lm_head
 */

import { ModelConfig, weightShapes } from './config.js';
import { CONFIG_TENSOR, TensorMap } from './pumaw1.js';

const LAYER_ALIASES: Array<[RegExp, string]> = [
    [/^h\.(\d+)\.attn\.q$/, 'layers.$1.attn.wq'],
    [/^h\.(\d+)\.attn\.k$/, 'layers.$1.attn.wk'],
    [/^h\.(\d+)\.attn\.v$/, 'layers.$1.attn.wv'],
    [/^h\.(\d+)\.attn\.o$/, 'layers.$1.attn.wo'],
    [/^h\.(\d+)\.mlp\.fc_in\.w$/, 'layers.$1.ffn.w1'],
    [/^h\.(\d+)\.mlp\.fc_in\.b$/, 'layers.$1.ffn.b1'],
    [/^h\.(\d+)\.mlp\.fc_out\.w$/, 'layers.$1.ffn.w2'],
    [/^h\.(\d+)\.mlp\.fc_out\.b$/, 'layers.$1.ffn.b2'],
    [/^h\.(\d+)\.ln_1\.g$/, 'layers.$1.ln1.gamma'],
    [/^h\.(\d+)\.ln_1\.b$/, 'layers.$1.ln1.beta'],
    [/^h\.(\d+)\.ln_2\.g$/, 'layers.$1.ln2.gamma'],
    [/^h\.(\d+)\.ln_2\.b$/, 'layers.$1.ln2.beta'],
];

const FLAT_ALIASES: Record<string, string> = {
    wte: 'token_embedding',
    wpe: 'position_embedding',
    'ln_f.g': 'final_ln.gamma',
    'ln_f.b': 'final_ln.beta',
    head: 'lm_head',
};

export function canonicalName(alias: string): string {
    if (alias in FLAT_ALIASES) return FLAT_ALIASES[alias];
    for (const [re, target] of LAYER_ALIASES) {
        if (re.test(alias)) return alias.replace(re, target);
    }
    // already-canonical names pass through untouched
    return alias;
}

export function convertCheckpoint(tensors: TensorMap, config: ModelConfig): TensorMap {
    const expected = weightShapes(config);
    const out: TensorMap = new Map();
    for (const [alias, tensor] of tensors) {
        if (alias === CONFIG_TENSOR) continue;
        const name = canonicalName(alias);
        if (!(name in expected)) {
            throw new Error(`unrecognized tensor '${alias}' (no mapping to the canonical layout)`);
        }
        if (out.has(name)) {
            throw new Error(`duplicate tensor '${alias}' maps onto '${name}'`);
        }
        const want = expected[name];
        const got = tensor.shape;
        if (want.length !== got.length || want.some((d, i) => d !== got[i])) {
            throw new Error(`tensor '${alias}' -> '${name}': shape [${got}] does not match [${want}]`);
        }
        out.set(name, tensor);
    }
    const missing = Object.keys(expected).filter((n) => !out.has(n));
    if (missing.length > 0) {
        throw new Error(`checkpoint is missing: ${missing.slice(0, 4).join(', ')}${missing.length > 4 ? ', ...' : ''}`);
    }
    return out;
}
