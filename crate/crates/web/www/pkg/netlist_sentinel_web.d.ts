/* tslint:disable */
/* eslint-disable */

/**
 * Both explainers trained on a handful of synthetic designs at one fixed
 * grid point, so construction stays interactive.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Explain a `LGFi,FFi,FFo,PI,PO` sample with both architectures.
     */
    explain(sample: string, k: number, threshold: number): string;
    constructor(designs: number, host_gates: number, seed: bigint);
    readonly records: number;
}

/**
 * The 31 feature-subset properties as JSON rows.
 */
export function property_table(): string;

/**
 * Generate one trojan-inserted netlist and extract its labelled feature rows.
 */
export function synth_extract(trigger_width: number, payload: string, host_gates: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_explain: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number, c: bigint) => [number, number, number];
    readonly demo_records: (a: number) => number;
    readonly property_table: () => [number, number];
    readonly synth_extract: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
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
