/* tslint:disable */
/* eslint-disable */

/**
 * One planted instance shared by the page's three operations.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Fits the instance and returns a `FitView` as JSON.
     */
    fit(hooi_iters: number, sparse_c: number): string;
    constructor(n1: number, n2: number, r: number, m: number, k1: number, k2: number, k3: number, seed: number, blocks: boolean);
    /**
     * Leading eigenvalues of one mode's second-moment matrix.
     */
    scree(mode: number, k_max: number): Float64Array;
    /**
     * Returns a `SimplexView` as JSON.
     */
    simplex(): string;
    readonly dims: Uint32Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_dims: (a: number) => [number, number];
    readonly demo_fit: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly demo_scree: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_simplex: (a: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
