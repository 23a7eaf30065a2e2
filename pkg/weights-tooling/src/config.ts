import { z } from 'zod';

export const ModelConfigSchema = z
    .object({
        n_layers: z.number().int().positive(),
        d_model: z.number().int().positive(),
        n_heads: z.number().int().positive(),
        d_ff: z.number().int().positive(),
        vocab_size: z.number().int().positive(),
        max_seq_len: z.number().int().positive(),
        norm_placement: z.enum(['post', 'pre']).default('post'),
        attn_scale: z.boolean().default(true),
    })
    .refine((c) => c.d_model % c.n_heads === 0, {
        message: 'd_model must be divisible by n_heads',
    });

export type ModelConfig = z.infer<typeof ModelConfigSchema>;

export function headDim(config: ModelConfig): number {
    return config.d_model / config.n_heads;
}

/** Shapes of every tensor a model file must carry, keyed by name. */
export function weightShapes(config: ModelConfig): Record<string, number[]> {
    const c = config;
    const shapes: Record<string, number[]> = {
        token_embedding: [c.vocab_size, c.d_model],
        position_embedding: [c.max_seq_len, c.d_model],
        'final_ln.gamma': [c.d_model],
        'final_ln.beta': [c.d_model],
        lm_head: [c.vocab_size, c.d_model],
    };
    for (let i = 0; i < c.n_layers; i++) {
        const p = `layers.${i}.`;
        for (const s of ['attn.wq', 'attn.wk', 'attn.wv', 'attn.wo']) {
            shapes[p + s] = [c.d_model, c.d_model];
        }
        shapes[p + 'ffn.w1'] = [c.d_model, c.d_ff];
        shapes[p + 'ffn.b1'] = [c.d_ff];
        shapes[p + 'ffn.w2'] = [c.d_ff, c.d_model];
        shapes[p + 'ffn.b2'] = [c.d_model];
        for (const s of ['ln1.gamma', 'ln1.beta', 'ln2.gamma', 'ln2.beta']) {
            shapes[p + s] = [c.d_model];
        }
    }
    return shapes;
}

/** The eight numbers stored in the __config__ meta tensor. */
export function configToTensor(config: ModelConfig): Float32Array {
    return new Float32Array([
        config.n_layers,
        config.d_model,
        config.n_heads,
        config.d_ff,
        config.vocab_size,
        config.max_seq_len,
        config.norm_placement === 'post' ? 0 : 1,
        config.attn_scale ? 1 : 0,
    ]);
}

export function configFromTensor(data: Float32Array): ModelConfig {
    if (data.length !== 8) {
        throw new Error(`__config__ must hold 8 values, got ${data.length}`);
    }
    return ModelConfigSchema.parse({
        n_layers: data[0],
        d_model: data[1],
        n_heads: data[2],
        d_ff: data[3],
        vocab_size: data[4],
        max_seq_len: data[5],
        norm_placement: data[6] === 0 ? 'post' : 'pre',
        attn_scale: data[7] !== 0,
    });
}
