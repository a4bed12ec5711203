/**
 * Text encoders behind a model-id registry.
 *
 * The built-in family is deterministic feature hashing ("hash-<dim>"):
 * lowercase alphanumeric tokens plus adjacent bigrams, FNV-1a hashed
 * into signed buckets. It needs no downloads and gives stable vectors,
 * which is what the round-trip contract with the retrieval engine needs.
 * Transformer-backed encoders can be added by implementing Encoder and
 * registering a factory for their model-id prefix.
 */

export interface Encoder {
  readonly modelId: string;
  readonly dim: number;
  encode(text: string): Float64Array;
}

const FNV_OFFSET = 0x811c9dc5;
const FNV_PRIME = 16777619;

export function fnv1a(data: Uint8Array): number {
  let hash = FNV_OFFSET;
  for (const byte of data) {
    hash ^= byte;
    hash = Math.imul(hash, FNV_PRIME) >>> 0;
  }
  return hash >>> 0;
}

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(/[a-z0-9]+/g) ?? [];
}

export class HashEncoder implements Encoder {
  readonly modelId: string;
  readonly dim: number;
  private readonly textEncoder = new TextEncoder();

  constructor(dim: number) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new Error(`hash encoder dim must be a positive integer, got ${dim}`);
    }
    this.dim = dim;
    this.modelId = `hash-${dim}`;
  }

  encode(text: string): Float64Array {
    const tokens = tokenize(text);
    const terms = [...tokens];
    for (let i = 0; i + 1 < tokens.length; i++) {
      terms.push(`${tokens[i]} ${tokens[i + 1]}`);
    }
    const vec = new Float64Array(this.dim);
    for (const term of terms) {
      const hash = fnv1a(this.textEncoder.encode(term));
      const bucket = hash % this.dim;
      const sign = (hash & 0x80000000) !== 0 ? -1 : 1;
      vec[bucket] += sign;
    }
    return vec;
  }
}

export function l2Normalize(vec: Float64Array, label: string): Float64Array {
  let sumSquares = 0;
  for (const x of vec) sumSquares += x * x;
  const norm = Math.sqrt(sumSquares);
  if (norm === 0) {
    throw new Error(`cannot normalize ${label}: text produced no features`);
  }
  const out = new Float64Array(vec.length);
  for (let i = 0; i < vec.length; i++) out[i] = vec[i] / norm;
  return out;
}

export function createEncoder(modelId: string): Encoder {
  const hashMatch = /^hash-(\d+)$/.exec(modelId);
  if (hashMatch) {
    return new HashEncoder(Number(hashMatch[1]));
  }
  throw new Error(
    `unknown model id ${JSON.stringify(modelId)}; available: hash-<dim>`,
  );
}
