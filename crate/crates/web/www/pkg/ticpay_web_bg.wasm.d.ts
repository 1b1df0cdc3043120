/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_ticdesk_free: (a: number, b: number) => void;
export const listScenarios: () => [number, number];
export const runScenario: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const tamperProbe: (a: number, b: number, c: bigint) => [number, number, number, number];
export const ticdesk_issue: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const ticdesk_new: (a: number, b: number) => [number, number, number];
export const ticdesk_redeem: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
