/** Wire types for the elicitation service. */

export type QuantityName = "S1_t0" | "delta11" | "delta21" | "delta22";

export const QUANTITY_NAMES: QuantityName[] = [
  "S1_t0",
  "delta11",
  "delta21",
  "delta22",
];

export const FAMILIES = [
  "exponential",
  "weibull",
  "lognormal",
  "loglogistic",
  "gompertz",
] as const;

export type FamilyName = (typeof FAMILIES)[number];

export type DistributionKind = "beta" | "normal" | "scaled_beta";

export interface Quartiles {
  q25: number;
  q50: number;
  q75: number;
}

export interface FitResult {
  name: QuantityName;
  distribution: string;
  params: Record<string, number>;
  fit_residual: number;
}

export interface ArmPreview {
  median: number[];
  lo: number[];
  hi: number[];
  mean_quartiles: [number, number, number];
}

export interface Preview {
  family: FamilyName;
  seed: number;
  n_preview: number;
  grid_years: number[];
  arms: { "1": ArmPreview; "2": ArmPreview };
  acceptance_rate: number;
  violations: Record<string, number>;
  n_proposed: number;
  session_version: number;
}

export interface ServiceError {
  code: string;
  message: string;
  field?: string;
  constraint?: string;
}
