/**
 * Node bindings for the logsigrnn path-signature library.
 *
 * The heavy lifting stays in the Python package; every bound function
 * serializes its buffers to the library's CSV wire format, runs the
 * corresponding CLI subcommand, and parses the result back into plain
 * number arrays. Float64 values survive both directions exactly: each side
 * prints shortest round-trip decimals.
 *
 * None of these calls mutate their inputs, and repeated calls with the
 * same arguments are idempotent.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

export const VERSION = "0.1.0";

export type Matrix = ReadonlyArray<ReadonlyArray<number>>;

export interface FeatureOptions {
  /** Truncation degree M (>= 1). */
  depth: number;
  /** Optional sample times, strictly increasing, one per row; defaults to 0..n-1. */
  times?: ReadonlyArray<number>;
  /** Python executable running the core package (default: $LOGSIGRNN_PYTHON or "python3"). */
  python?: string;
}

export interface SequenceOptions extends FeatureOptions {
  /** Number of coarse segments N (>= 1). */
  segments: number;
}

function mobius(n: number): number {
  if (n === 1) return 1;
  let result = 1;
  let m = n;
  for (let p = 2; p * p <= m; p += 1) {
    if (m % p === 0) {
      m = Math.floor(m / p);
      if (m % p === 0) return 0;
      result = -result;
    }
  }
  if (m > 1) result = -result;
  return result;
}

/** Count of Lyndon words of length exactly n over a width-letter alphabet. */
export function necklace_count(width: number, n: number): number {
  let total = 0;
  for (let k = 1; k <= n; k += 1) {
    if (n % k === 0) total += mobius(k) * width ** (n / k);
  }
  return total / n;
}

/** Dimension of the truncated log-signature over grades 1..depth. */
export function logsig_dim(width: number, depth: number): number {
  if (width < 1 || depth < 1) throw new Error("width and depth must be >= 1");
  let total = 0;
  for (let n = 1; n <= depth; n += 1) total += necklace_count(width, n);
  return total;
}

/** Length of the flattened signature, levels 1..depth. */
export function signature_dim(width: number, depth: number): number {
  if (width < 1 || depth < 1) throw new Error("width and depth must be >= 1");
  let total = 0;
  for (let k = 1; k <= depth; k += 1) total += width ** k;
  return total;
}

function checkMatrix(values: Matrix, what: string): { rows: number; cols: number } {
  if (!Array.isArray(values) || values.length === 0) {
    throw new Error(`${what} must have at least one row`);
  }
  const cols = values[0].length;
  values.forEach((row: ReadonlyArray<number>, i: number) => {
    if (row.length !== cols) {
      throw new Error(`${what} row ${i} has width ${row.length}, expected ${cols}`);
    }
    row.forEach((v: number, j: number) => {
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new Error(`${what}[${i}][${j}] is not a finite number`);
      }
    });
  });
  return { rows: values.length, cols };
}

function resolveTimes(values: Matrix, times?: ReadonlyArray<number>): ReadonlyArray<number> {
  if (times === undefined) {
    return Array.from({ length: values.length }, (_, i) => i);
  }
  if (times.length !== values.length) {
    throw new Error(
      `times has length ${times.length}, expected one entry per row (${values.length})`,
    );
  }
  for (let i = 1; i < times.length; i += 1) {
    if (!(times[i] > times[i - 1])) {
      throw new Error(`times must be strictly increasing (violated at index ${i})`);
    }
  }
  return times;
}

function pathCsv(values: Matrix, times: ReadonlyArray<number>): string {
  const { cols } = checkMatrix(values, "values");
  const header = "time," + Array.from({ length: cols }, (_, i) => `x${i + 1}`).join(",");
  const lines = [header];
  for (let i = 0; i < values.length; i += 1) {
    lines.push(String(times[i]) + "," + values[i].map(String).join(","));
  }
  return lines.join("\n") + "\n";
}

function matrixCsv(values: Matrix): string {
  return values.map((row) => row.map(String).join(",")).join("\n") + "\n";
}

function pythonExe(python?: string): string {
  return python ?? process.env.LOGSIGRNN_PYTHON ?? "python3";
}

export function runCli(args: string[], stdin: string, python?: string): string {
  const proc = spawnSync(pythonExe(python), ["-m", "logsigrnn.cli", ...args], {
    input: stdin,
    encoding: "utf8",
    maxBuffer: 1 << 28,
  });
  if (proc.error) {
    throw new Error(`failed to launch the core CLI: ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    throw new Error(
      `core CLI exited with ${proc.status}: ${proc.stderr.trim() || "(no stderr)"}`,
    );
  }
  return proc.stdout;
}

function parseRow(line: string): number[] {
  return line.split(",").map((tok) => {
    const v = Number(tok);
    if (!Number.isFinite(v)) throw new Error(`core CLI produced a non-numeric token: ${tok}`);
    return v;
  });
}

function parseMatrix(text: string): number[][] {
  return text
    .trim()
    .split("\n")
    .filter((ln) => ln.length > 0)
    .map(parseRow);
}

function checkDepth(opts: FeatureOptions): void {
  if (!Number.isInteger(opts.depth) || opts.depth < 1) {
    throw new Error(`depth must be a positive integer, got ${opts.depth}`);
  }
}

/** Flattened truncated signature (levels 1..depth) of one path. */
export function signature(values: Matrix, opts: FeatureOptions): number[] {
  checkDepth(opts);
  const times = resolveTimes(values, opts.times);
  const out = runCli(
    ["sig", "--depth", String(opts.depth)],
    pathCsv(values, times),
    opts.python,
  );
  return parseMatrix(out)[0];
}

/** Whole-path log-signature in Lyndon coordinates. */
export function log_signature(values: Matrix, opts: FeatureOptions): number[] {
  checkDepth(opts);
  const times = resolveTimes(values, opts.times);
  const out = runCli(
    ["logsig", "--depth", String(opts.depth), "--segments", "1"],
    pathCsv(values, times),
    opts.python,
  );
  return parseMatrix(out)[0];
}

/** Per-segment log-signatures over a coarse partition: (segments, d_ls). */
export function logsig_sequence(values: Matrix, opts: SequenceOptions): number[][] {
  checkDepth(opts);
  checkSegments(values, opts);
  const times = resolveTimes(values, opts.times);
  const out = runCli(
    ["logsig", "--depth", String(opts.depth), "--segments", String(opts.segments)],
    pathCsv(values, times),
    opts.python,
  );
  return parseMatrix(out);
}

function checkSegments(values: Matrix, opts: SequenceOptions): void {
  if (!Number.isInteger(opts.segments) || opts.segments < 1) {
    throw new Error(`segments must be a positive integer, got ${opts.segments}`);
  }
  if (opts.segments > values.length - 1) {
    throw new Error(
      `segments=${opts.segments} exceeds the ${values.length - 1} increments of a ` +
        `${values.length}-row path`,
    );
  }
}

/**
 * Gradient of <upstream, logsig_sequence(values)> with respect to values:
 * an (n, d) matrix. Suitable for registering the sequence layer as a
 * custom-gradient op in an external ML framework.
 */
export function logsig_sequence_vjp(
  values: Matrix,
  upstream: Matrix,
  opts: SequenceOptions,
): number[][] {
  checkDepth(opts);
  checkSegments(values, opts);
  const { cols } = checkMatrix(values, "values");
  const up = checkMatrix(upstream, "upstream");
  if (up.rows !== opts.segments) {
    throw new Error(`upstream has ${up.rows} rows, expected segments=${opts.segments}`);
  }
  const want = logsig_dim(cols, opts.depth);
  if (up.cols !== want) {
    throw new Error(
      `upstream has ${up.cols} columns, expected d_ls=${want} for width=${cols} ` +
        `depth=${opts.depth}`,
    );
  }
  const times = resolveTimes(values, opts.times);
  // ship the upstream matrix through a temp file; stdin carries the path
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "logsigrnn-"));
  const upPath = path.join(dir, "upstream.csv");
  try {
    fs.writeFileSync(upPath, matrixCsv(upstream));
    const out = runCli(
      [
        "logsig-vjp",
        "--depth",
        String(opts.depth),
        "--segments",
        String(opts.segments),
        "--upstream",
        upPath,
      ],
      pathCsv(values, times),
      opts.python,
    );
    return parseMatrix(out);
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

/** Version string of the core Python package. */
export function core_version(python?: string): string {
  const proc = spawnSync(pythonExe(python), ["-m", "logsigrnn.cli", "--version"], {
    encoding: "utf8",
  });
  if (proc.status !== 0) {
    throw new Error(`core CLI exited with ${proc.status}: ${proc.stderr.trim()}`);
  }
  return proc.stdout.trim();
}
