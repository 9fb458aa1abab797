/* tslint:disable */
/* eslint-disable */

export function edelmanCurve(eps_grid: Float64Array): Float64Array;

export function ginibreTail(n: number, k: number, eps_grid: Float64Array, trials: number, seed: number): Float64Array;

export function goeEigenvalues(n: number, seed: number): Float64Array;

export function levyCurve(dist: string, p: number, eps_grid: Float64Array): Float64Array;

export function semicircle(xs: Float64Array): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly edelmanCurve: (a: number, b: number) => [number, number];
    readonly ginibreTail: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly goeEigenvalues: (a: number, b: number) => [number, number, number, number];
    readonly levyCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly semicircle: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
