/* tslint:disable */
/* eslint-disable */

/**
 * A bank-side code registry the page can issue from and redeem against.
 */
export class TicDesk {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Newline-separated codes.
     */
    issue(account: string, count: number, seed: bigint): string;
    constructor(symbols: number, alphanumeric: boolean);
    redeem(account: string, code: string): string;
}

export function listScenarios(): string;

export function runScenario(source: string, seed?: bigint | null): string;

export function tamperProbe(byte: number, bit: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_ticdesk_free: (a: number, b: number) => void;
    readonly listScenarios: () => [number, number];
    readonly runScenario: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly tamperProbe: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly ticdesk_issue: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly ticdesk_new: (a: number, b: number) => [number, number, number];
    readonly ticdesk_redeem: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
