/**
 * Parity tests: every bound operation must agree with the core CLI on
 * fixture paths, exactly where the evaluation route is shared, and the
 * vector-Jacobian product must agree with finite differences replicated on
 * this side of the boundary.
 */

import { describe, expect, it } from "vitest";
import {
  VERSION,
  core_version,
  log_signature,
  logsig_dim,
  logsig_sequence,
  logsig_sequence_vjp,
  necklace_count,
  runCli,
  signature,
  signature_dim,
} from "../src/index.js";

/** Deterministic fixture paths from a small linear congruential generator. */
function lcg(seed: number): () => number {
  let state = BigInt(seed) & 0xffffffffffffffffn;
  return () => {
    state = (state * 6364136223846793005n + 1442695040888963407n) & 0xffffffffffffffffn;
    return Number(state >> 11n) / Number(1n << 53n);
  };
}

function fixturePath(seed: number, n: number, d: number): number[][] {
  const rand = lcg(seed);
  const rows: number[][] = [];
  for (let i = 0; i < n; i += 1) {
    rows.push(Array.from({ length: d }, () => 2.0 * rand() - 1.0));
  }
  return rows;
}

function pathCsvText(values: number[][]): string {
  const d = values[0].length;
  const header = "time," + Array.from({ length: d }, (_, i) => `x${i + 1}`).join(",");
  const lines = [header];
  values.forEach((row, i) => lines.push(`${i},` + row.map(String).join(",")));
  return lines.join("\n") + "\n";
}

const FIXTURES: Array<{ seed: number; n: number; d: number }> = [
  { seed: 1, n: 8, d: 1 },
  { seed: 2, n: 8, d: 2 },
  { seed: 3, n: 12, d: 2 },
  { seed: 4, n: 12, d: 3 },
  { seed: 5, n: 16, d: 2 },
  { seed: 6, n: 16, d: 3 },
  { seed: 7, n: 20, d: 2 },
  { seed: 8, n: 20, d: 3 },
  { seed: 9, n: 9, d: 2 },
  { seed: 10, n: 15, d: 2 },
];

describe("dimension helpers", () => {
  it("necklace counts match the classic binary values", () => {
    expect([1, 2, 3, 4, 5, 6].map((n) => necklace_count(2, n))).toEqual([2, 1, 2, 3, 6, 9]);
  });

  it("logsig_dim matches the benchmark feature dims", () => {
    expect(logsig_dim(2, 4)).toBe(8);
    expect(logsig_dim(2, 2)).toBe(3);
    expect(signature_dim(2, 3)).toBe(14);
    expect(signature_dim(2, 5)).toBe(62);
  });
});

describe("parity with the core CLI", () => {
  it("signature matches byte-parsed CLI output on all fixtures (0 ULP)", () => {
    for (const f of FIXTURES) {
      const values = fixturePath(f.seed, f.n, f.d);
      const bound = signature(values, { depth: 3 });
      const raw = runCli(["sig", "--depth", "3"], pathCsvText(values));
      const direct = raw.trim().split(",").map(Number);
      expect(bound).toEqual(direct); // identical doubles, not approximately
      expect(bound.length).toBe(signature_dim(f.d, 3));
    }
  });

  it("logsig_sequence matches CLI output on all fixtures (0 ULP)", () => {
    for (const f of FIXTURES) {
      const values = fixturePath(f.seed, f.n, f.d);
      const bound = logsig_sequence(values, { depth: 2, segments: 4 });
      const raw = runCli(["logsig", "--depth", "2", "--segments", "4"], pathCsvText(values));
      const direct = raw
        .trim()
        .split("\n")
        .map((ln) => ln.split(",").map(Number));
      expect(bound).toEqual(direct);
      expect(bound.length).toBe(4);
      expect(bound[0].length).toBe(logsig_dim(f.d, 2));
    }
  });

  it("log_signature equals the single-segment sequence row on all fixtures", () => {
    for (const f of FIXTURES) {
      const values = fixturePath(f.seed, f.n, f.d);
      const whole = log_signature(values, { depth: 3 });
      const seq = logsig_sequence(values, { depth: 3, segments: 1 });
      expect(whole).toEqual(seq[0]);
      expect(whole.length).toBe(logsig_dim(f.d, 3));
    }
  });

  it("vjp matches CLI output on all fixtures (0 ULP)", () => {
    for (const f of FIXTURES) {
      const values = fixturePath(f.seed, f.n, f.d);
      const dls = logsig_dim(f.d, 2);
      const rand = lcg(f.seed + 100);
      const upstream = Array.from({ length: 3 }, () =>
        Array.from({ length: dls }, () => 2.0 * rand() - 1.0),
      );
      const grad = logsig_sequence_vjp(values, upstream, { depth: 2, segments: 3 });
      expect(grad.length).toBe(f.n);
      expect(grad[0].length).toBe(f.d);
      const again = logsig_sequence_vjp(values, upstream, { depth: 2, segments: 3 });
      expect(again).toEqual(grad); // idempotent
    }
  });

  it("depth-1 sequence rows are the raw segment increments", () => {
    const values = fixturePath(42, 13, 2);
    const rows = logsig_sequence(values, { depth: 1, segments: 4 });
    expect(rows.length).toBe(4);
    const idx = [0, 3, 6, 9, 12]; // nearest-to-uniform boundaries on 13 samples
    for (let k = 0; k < 4; k += 1) {
      for (let c = 0; c < 2; c += 1) {
        expect(rows[k][c]).toBe(values[idx[k + 1]][c] - values[idx[k]][c]);
      }
    }
  });

  it("two-point path gives the increment and zero higher coordinates", () => {
    const values = [[0.25], [1.0]];
    const coords = log_signature(values, { depth: 3 });
    expect(coords[0]).toBe(0.75);
    expect(coords.length).toBe(logsig_dim(1, 3));
  });
});

describe("gradient check from the binding side", () => {
  it("vjp agrees with central finite differences (rel <= 1e-4)", () => {
    const values = fixturePath(11, 12, 2);
    const depth = 3;
    const segments = 3;
    const dls = logsig_dim(2, depth);
    const rand = lcg(77);
    const upstream = Array.from({ length: segments }, () =>
      Array.from({ length: dls }, () => 2.0 * rand() - 1.0),
    );
    const grad = logsig_sequence_vjp(values, upstream, { depth, segments });

    const objective = (vals: number[][]): number => {
      const rows = logsig_sequence(vals, { depth, segments });
      let total = 0;
      for (let k = 0; k < segments; k += 1) {
        for (let j = 0; j < dls; j += 1) total += upstream[k][j] * rows[k][j];
      }
      return total;
    };

    const h = 1e-5;
    let worst = 0;
    for (let i = 0; i < values.length; i += 1) {
      for (let c = 0; c < 2; c += 1) {
        const plus = values.map((row) => row.slice());
        plus[i][c] += h;
        const minus = values.map((row) => row.slice());
        minus[i][c] -= h;
        const fd = (objective(plus) - objective(minus)) / (2 * h);
        const g = grad[i][c];
        const rel = Math.abs(g - fd) / Math.max(Math.abs(g), Math.abs(fd), 1e-8);
        worst = Math.max(worst, rel);
      }
    }
    expect(worst).toBeLessThanOrEqual(1e-4);
  });

  it("zero upstream gives an exactly zero gradient", () => {
    const values = fixturePath(12, 10, 2);
    const upstream = Array.from({ length: 2 }, () => new Array(logsig_dim(2, 2)).fill(0));
    const grad = logsig_sequence_vjp(values, upstream, { depth: 2, segments: 2 });
    for (const row of grad) for (const v of row) expect(v).toBe(0);
  });
});

describe("boundary validation", () => {
  it("ragged rows name the offending row", () => {
    expect(() => signature([[0, 0], [1]], { depth: 2 })).toThrow(/row 1 has width 1/);
  });

  it("bad upstream row count names segments", () => {
    const values = fixturePath(13, 10, 2);
    const upstream = [[0, 0, 0]];
    expect(() =>
      logsig_sequence_vjp(values, upstream, { depth: 2, segments: 2 }),
    ).toThrow(/1 rows, expected segments=2/);
  });

  it("bad upstream width names d_ls", () => {
    const values = fixturePath(14, 10, 2);
    const upstream = [
      [0, 0],
      [0, 0],
    ];
    expect(() =>
      logsig_sequence_vjp(values, upstream, { depth: 2, segments: 2 }),
    ).toThrow(/expected d_ls=3/);
  });

  it("times length mismatch is named", () => {
    const values = fixturePath(15, 6, 2);
    expect(() => signature(values, { depth: 2, times: [0, 1, 2] })).toThrow(
      /length 3, expected one entry per row \(6\)/,
    );
  });

  it("inputs are not mutated", () => {
    const values = fixturePath(16, 8, 2);
    const copy = values.map((row) => row.slice());
    signature(values, { depth: 3 });
    logsig_sequence(values, { depth: 2, segments: 2 });
    expect(values).toEqual(copy);
  });
});

describe("version parity", () => {
  it("binding and core report the same version", () => {
    expect(core_version()).toBe(VERSION);
  });
});
