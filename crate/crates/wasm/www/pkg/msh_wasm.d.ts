/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Interleaved endpoint indices of the undirected Voronoi pairs.
     */
    edges(): Uint32Array;
    is_empty(): boolean;
    len(): number;
    constructor(kind: string, side: number, seed: number);
    /**
     * Interleaved `x, y` coordinates.
     */
    points(): Float64Array;
    segment(pixels: Float64Array, width: number, height: number, cap: number, weight: number): Float64Array;
    side(): number;
    /**
     * Energy after every sweep of the last segmentation.
     */
    trace(): Float64Array;
}

export function anisotropy(kind: string, t: number, n: number, seed: number): Float64Array;

/**
 * Two-phase disk image with Gaussian noise, row-major.
 */
export function noisy_disk(width: number, height: number, noise: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly anisotropy: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_edges: (a: number) => [number, number];
    readonly demo_is_empty: (a: number) => number;
    readonly demo_len: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly demo_points: (a: number) => [number, number];
    readonly demo_segment: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly demo_side: (a: number) => number;
    readonly demo_trace: (a: number) => [number, number];
    readonly noisy_disk: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
