/**
 * Thin wrapper around the `discobox` command-line tool.
 *
 * Every call shells out to the installed CLI and exchanges data through
 * bundle files and JSON reports, so this package needs no numerical code
 * of its own.
 */

import { spawnSync } from "node:child_process";
import { readFileSync } from "node:fs";

import { BundleEntry, readBundle } from "./bundle.js";

export interface RunResult {
  exitCode: number;
  stderr: string;
}

export interface EvalReport {
  ap: Record<string, number>;
  mean_ap: number;
  warning_empty: boolean;
  schema_version: number;
}

export interface ClientOptions {
  /** Executable name or path; defaults to `discobox` on PATH. */
  executable?: string;
  /** Extra `--set key=value` overrides applied to every run. */
  overrides?: Record<string, string | number>;
}

export class DiscoboxClient {
  private readonly executable: string;
  private readonly overrides: string[];

  constructor(options: ClientOptions = {}) {
    this.executable = options.executable ?? "discobox";
    this.overrides = Object.entries(options.overrides ?? {}).flatMap(
      ([k, v]) => ["--set", `${k}=${v}`],
    );
  }

  private run(args: string[], withOverrides = true): RunResult {
    const full = withOverrides ? [...args, ...this.overrides] : args;
    const proc = spawnSync(this.executable, full, { encoding: "utf-8" });
    if (proc.error) {
      throw proc.error;
    }
    return { exitCode: proc.status ?? -1, stderr: proc.stderr ?? "" };
  }

  private runOrThrow(args: string[]): void {
    const res = this.run(args);
    if (res.exitCode !== 0) {
      throw new Error(
        `discobox ${args[0]} failed with exit ${res.exitCode}: ${res.stderr.trim()}`,
      );
    }
  }

  /** Refine a batch bundle; returns the decoded output bundle. */
  refine(
    inputPath: string,
    outputPath: string,
    extra: { bank?: string; bankOut?: string; threads?: number } = {},
  ): BundleEntry[] {
    const args = ["refine", "--input", inputPath, "--output", outputPath];
    if (extra.bank) args.push("--bank", extra.bank);
    if (extra.bankOut) args.push("--bank-out", extra.bankOut);
    if (extra.threads !== undefined) args.push("--threads", String(extra.threads));
    this.runOrThrow(args);
    return readBundle(readFileSync(outputPath));
  }

  /** Match two single-object bundles; returns the decoded plan bundle. */
  match(aPath: string, bPath: string, outPath: string): BundleEntry[] {
    this.runOrThrow(["match", "--a", aPath, "--b", bPath, "--out", outPath]);
    return readBundle(readFileSync(outPath));
  }

  /** Evaluate correspondence predictions; returns the parsed JSON report. */
  evalCorr(predPath: string, gtPath: string, reportPath: string): EvalReport {
    const res = this.run(
      ["eval-corr", "--pred", predPath, "--gt", gtPath, "--report", reportPath],
      false,
    );
    if (res.exitCode !== 0) {
      throw new Error(`discobox eval-corr failed: ${res.stderr.trim()}`);
    }
    return JSON.parse(readFileSync(reportPath, "utf-8")) as EvalReport;
  }
}
