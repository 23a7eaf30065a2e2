#!/usr/bin/env node
/**
 * weights-tooling: export PUMAW1 model files and golden-vector JSON.
 *
 *   weights-tooling export-weights --seed 0 --out model.pw1 [--n-layers 2 ...]
 *   weights-tooling gen-golden --weights model.pw1 --cases 3 --seed 1 --out golden.json
 */

import { readFileSync, writeFileSync } from 'node:fs';
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { ModelConfigSchema, configFromTensor, configToTensor } from './config.js';
import { convertCheckpoint } from './convert.js';
import { genGolden } from './golden.js';
import { CONFIG_TENSOR, deserialize, serialize, TensorMap } from './pumaw1.js';
import { stripConfig } from './forward.js';
import { randomWeights } from './weights.js';

const cli = yargs(hideBin(process.argv))
    .scriptName('weights-tooling')
    .strict()
    .demandCommand(1)
    .command(
        'export-weights',
        'write a random-initialized PUMAW1 model file',
        (y) =>
            y
                .option('out', { type: 'string', demandOption: true })
                .option('seed', { type: 'number', default: 0 })
                .option('n-layers', { type: 'number', default: 2 })
                .option('d-model', { type: 'number', default: 64 })
                .option('n-heads', { type: 'number', default: 4 })
                .option('d-ff', { type: 'number', default: 256 })
                .option('vocab-size', { type: 'number', default: 100 })
                .option('max-seq-len', { type: 'number', default: 16 })
                .option('norm-placement', { choices: ['post', 'pre'] as const, default: 'post' as const })
                .option('attn-scale', { type: 'boolean', default: true }),
        (argv) => {
            const config = ModelConfigSchema.parse({
                n_layers: argv.nLayers,
                d_model: argv.dModel,
                n_heads: argv.nHeads,
                d_ff: argv.dFf,
                vocab_size: argv.vocabSize,
                max_seq_len: argv.maxSeqLen,
                norm_placement: argv.normPlacement,
                attn_scale: argv.attnScale,
            });
            const weights = randomWeights(config, argv.seed);
            writeFileSync(argv.out, serialize(weights));
            console.log(JSON.stringify({ written: argv.out, tensors: weights.size, seed: argv.seed }));
        },
    )
    .command(
        'gen-golden',
        'emit golden vectors (tokens + reference logits) for a model file',
        (y) =>
            y
                .option('weights', { type: 'string', demandOption: true })
                .option('out', { type: 'string', demandOption: true })
                .option('cases', { type: 'number', default: 3 })
                .option('seed', { type: 'number', default: 1 })
                .option('activations', { type: 'boolean', default: false }),
        (argv) => {
            const tensors = deserialize(readFileSync(argv.weights));
            const meta = tensors.get(CONFIG_TENSOR);
            if (!meta) throw new Error(`model file missing ${CONFIG_TENSOR} tensor`);
            if (tensors.size <= 1) throw new Error('model file holds no weight tensors');
            const config = configFromTensor(meta.data);
            const golden = genGolden(stripConfig(tensors), config, argv.cases, argv.seed, argv.activations);
            writeFileSync(argv.out, JSON.stringify(golden, null, 1) + '\n');
            console.log(JSON.stringify({ written: argv.out, cases: golden.cases.length }));
        },
    )
    .command(
        'convert',
        'rename checkpoint tensors into the canonical layout (documented aliases only)',
        (y) =>
            y
                .option('in', { type: 'string', demandOption: true })
                .option('out', { type: 'string', demandOption: true })
                .option('config', {
                    type: 'string',
                    demandOption: true,
                    describe: 'JSON architecture description for validation',
                }),
        (argv) => {
            const config = ModelConfigSchema.parse(JSON.parse(readFileSync(argv.config, 'utf-8')));
            const src = deserialize(readFileSync(argv.in));
            const converted = convertCheckpoint(src, config);
            const out: TensorMap = new Map([[CONFIG_TENSOR, { shape: [8], data: configToTensor(config) }]]);
            for (const [name, t] of converted) out.set(name, t);
            writeFileSync(argv.out, serialize(out));
            console.log(JSON.stringify({ written: argv.out, tensors: out.size }));
        },
    );

cli.parseAsync().catch((err) => {
    console.error(String(err?.message ?? err));
    process.exit(1);
});
