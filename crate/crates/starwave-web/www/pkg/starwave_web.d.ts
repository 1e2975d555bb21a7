/* tslint:disable */
/* eslint-disable */

/**
 * Chain alpha_n = ratio^n: [s, ||u(0)||_1, sqrt(2 s), then ||u(t)||_inf at n times in [0, t_max]].
 */
export function chain_norms(ratio: number, k: number, t_max: number, n: number): Float64Array;

/**
 * Sup-norm of e^{itH0} applied to e^{-x^2} on every branch, at `n` times in [t_min, t_max].
 * Returns [t, sup, fitted slope] rows; the slope is repeated on every row.
 */
export function free_decay(n_branches: number, t_min: number, t_max: number, n: number): Float64Array;

/**
 * Scattering on branch 0 of an N-branch network with V = a e^{-r x} + h 1_[0,w].
 * Returns [z, |T|^2, |R2|^2, defect] repeated for each of `n` points in (0, z_max].
 */
export function scattering(n_branches: number, amplitude: number, rate: number, height: number, width: number, z_max: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly chain_norms: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly free_decay: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scattering: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
