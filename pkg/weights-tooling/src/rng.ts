/**
 * Deterministic random numbers for reproducible weight files.
 *
 * splitmix64 over BigInt state drives 53-bit uniforms; normals come from
 * the Box-Muller transform. Fixed seed -> identical file bytes.
 */

const MASK64 = (1n << 64n) - 1n;

export class SplitMix64 {
    private state: bigint;

    constructor(seed: bigint | number) {
        this.state = BigInt(seed) & MASK64;
    }

    nextU64(): bigint {
        this.state = (this.state + 0x9e3779b97f4a7c15n) & MASK64;
        let z = this.state;
        z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
        z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
        return (z ^ (z >> 31n)) & MASK64;
    }

    /** Uniform in [0, 1) with 53 bits of precision. */
    uniform(): number {
        return Number(this.nextU64() >> 11n) / 2 ** 53;
    }

    /** Standard normal via Box-Muller (consumes two uniforms). */
    normal(): number {
        let u = this.uniform();
        if (u === 0) u = 2 ** -53;
        const v = this.uniform();
        return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
    }

    normals(n: number, mean = 0, std = 1): Float64Array {
        const out = new Float64Array(n);
        for (let i = 0; i < n; i++) out[i] = mean + std * this.normal();
        return out;
    }
}
