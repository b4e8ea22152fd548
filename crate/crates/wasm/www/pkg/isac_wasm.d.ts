/* tslint:disable */
/* eslint-disable */

/**
 * `(MI bits, U_mse)` pairs along the boundary, MSE-optimal end first.
 */
export function mse_mi_curve(n_tx: number, len: number, corr_coeff: number, target_gain_dbm: number, limited: boolean, n_points: number): Float64Array;

export function roc_curve(dof: number, s2: number, n: number): Float64Array;

/**
 * Water-filled powers of the given channel eigenvalues (any order).
 */
export function water_filling(eigenvalues: Float64Array, sigma_p2: number, budget: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly mse_mi_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly roc_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly water_filling: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
