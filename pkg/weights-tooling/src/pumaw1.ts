/**
 * PUMAW1 binary weight files (little-endian throughout):
 * magic "PUMAW1\0\0" | u32 tensor count | per tensor:
 * u16 name length, UTF-8 name, u8 dtype (0 = float32), u8 rank,
 * u32 dims[rank], raw float32 data.
 */

export const MAGIC = Buffer.from('PUMAW1\0\0', 'latin1');
export const DTYPE_F32 = 0;
export const CONFIG_TENSOR = '__config__';

export interface Tensor {
    shape: number[];
    data: Float32Array;
}

export type TensorMap = Map<string, Tensor>;

export function serialize(tensors: TensorMap): Buffer {
    const parts: Buffer[] = [MAGIC];
    const count = Buffer.alloc(4);
    count.writeUInt32LE(tensors.size);
    parts.push(count);
    for (const [name, t] of tensors) {
        const size = t.shape.reduce((a, b) => a * b, 1);
        if (t.data.length !== size) {
            throw new Error(`tensor ${name}: ${t.data.length} values for shape [${t.shape}]`);
        }
        const nameBytes = Buffer.from(name, 'utf-8');
        const head = Buffer.alloc(2 + nameBytes.length + 2 + 4 * t.shape.length);
        let off = head.writeUInt16LE(nameBytes.length, 0);
        off += nameBytes.copy(head, off);
        off = head.writeUInt8(DTYPE_F32, off);
        off = head.writeUInt8(t.shape.length, off);
        for (const d of t.shape) off = head.writeUInt32LE(d, off);
        const body = Buffer.alloc(4 * size);
        for (let i = 0; i < size; i++) body.writeFloatLE(t.data[i], 4 * i);
        parts.push(head, body);
    }
    return Buffer.concat(parts);
}

export function deserialize(buf: Buffer): TensorMap {
    const need = (off: number, n: number) => {
        if (off + n > buf.length) {
            throw new Error(`truncated file: need ${n} bytes at offset ${off}, have ${buf.length - off}`);
        }
    };
    need(0, 8);
    if (!buf.subarray(0, 8).equals(MAGIC)) {
        throw new Error(`bad magic at offset 0`);
    }
    let off = 8;
    need(off, 4);
    const count = buf.readUInt32LE(off);
    off += 4;
    const out: TensorMap = new Map();
    for (let i = 0; i < count; i++) {
        need(off, 2);
        const nlen = buf.readUInt16LE(off);
        off += 2;
        need(off, nlen);
        const name = buf.subarray(off, off + nlen).toString('utf-8');
        off += nlen;
        need(off, 2);
        const dtype = buf.readUInt8(off);
        const rank = buf.readUInt8(off + 1);
        off += 2;
        if (dtype !== DTYPE_F32) {
            throw new Error(`unsupported dtype ${dtype} at offset ${off - 2}`);
        }
        need(off, 4 * rank);
        const shape: number[] = [];
        for (let d = 0; d < rank; d++) {
            shape.push(buf.readUInt32LE(off));
            off += 4;
        }
        const size = shape.reduce((a, b) => a * b, 1);
        need(off, 4 * size);
        const data = new Float32Array(size);
        for (let j = 0; j < size; j++) data[j] = buf.readFloatLE(off + 4 * j);
        off += 4 * size;
        out.set(name, { shape, data });
    }
    if (off !== buf.length) {
        throw new Error(`${buf.length - off} trailing bytes at offset ${off}`);
    }
    return out;
}
