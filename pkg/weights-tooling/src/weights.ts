import { ModelConfig, weightShapes, configToTensor } from './config.js';
import { SplitMix64 } from './rng.js';
import { CONFIG_TENSOR, Tensor, TensorMap } from './pumaw1.js';

function tensor(shape: number[], values: Float64Array): Tensor {
    return { shape, data: Float32Array.from(values) };
}

/**
 * Random-initialized weights with activation-friendly scales: O(1)
 * embeddings, fan-in scaled projections, near-identity layer norms.
 */
export function randomWeights(config: ModelConfig, seed: number): TensorMap {
    const rng = new SplitMix64(seed);
    const shapes = weightShapes(config);
    const w: TensorMap = new Map();
    const size = (s: number[]) => s.reduce((a, b) => a * b, 1);

    const std = (name: string): number => {
        if (name === 'token_embedding') return 0.4;
        if (name === 'position_embedding') return 0.2;
        if (name.includes('attn.')) return 1 / Math.sqrt(config.d_model);
        if (name.includes('ffn.w1')) return 1 / Math.sqrt(config.d_model);
        if (name.includes('ffn.w2')) return 1 / Math.sqrt(config.d_ff);
        if (name.includes('ffn.b')) return 0.02;
        if (name === 'lm_head') return 1 / Math.sqrt(config.d_model);
        if (name.includes('gamma') || name.includes('beta')) return 0.05;
        throw new Error(`no init rule for ${name}`);
    };

    for (const [name, shape] of Object.entries(shapes)) {
        const mean = name.includes('gamma') ? 1.0 : 0.0;
        w.set(name, tensor(shape, rng.normals(size(shape), mean, std(name))));
    }
    w.set(CONFIG_TENSOR, { shape: [8], data: configToTensor(config) });
    return w;
}
