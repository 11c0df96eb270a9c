/** Service-response fixtures mirroring the HTTP contracts. */

import type {
  AnomalyDoc,
  AreaDoc,
  IntervalsDoc,
  RolesDoc,
  SealDoc,
  ValuesDoc,
  WorkbookDoc,
} from "../src/types.js";

export const workbook: WorkbookDoc = {
  name: "demo",
  sheets: [
    {
      name: "Main",
      rows: 6,
      cols: 4,
      cells: [
        { addr: "Main!A1", col: 1, row: 1, kind: "constant", content: '"Revenue"', value: "Revenue", hidden: false, locked: false },
        { addr: "Main!B1", col: 2, row: 1, kind: "constant", content: "1000", value: 1000, hidden: false, locked: false },
        { addr: "Main!B2", col: 2, row: 2, kind: "formula", content: "=(B1*0.2)", value: null, hidden: false, locked: false },
        { addr: "Main!B3", col: 2, row: 3, kind: "formula", content: "=(B1*0.2)", value: null, hidden: false, locked: false },
        { addr: "Main!B4", col: 2, row: 4, kind: "formula", content: "=(B1*0.2)", value: null, hidden: false, locked: false },
        { addr: "Main!B5", col: 2, row: 5, kind: "formula", content: "=((B1*0.2)+9)", value: null, hidden: false, locked: false },
        { addr: "Main!D6", col: 4, row: 6, kind: "formula", content: "=[Ext]S!B2", value: null, hidden: true, locked: false },
      ],
    },
  ],
};

export const values: ValuesDoc = {
  values: {
    "Main!A1": "Revenue",
    "Main!B1": 1000,
    "Main!B2": 200,
    "Main!B3": 200,
    "Main!B4": 200,
    "Main!B5": 209,
    "Main!D6": { error: "EXT" },
  },
};

export const areas: AreaDoc[] = [
  { id: 1, level: "COPY", signature: "=(R[-1]C*0.2)", members: ["Main!B2", "Main!B3", "Main!B4"] },
  { id: 2, level: "COPY", signature: "=((R[-4]C*0.2)+9)", members: ["Main!B5"] },
  { id: 3, level: "COPY", signature: "=[Ext]S!R2C2", members: ["Main!D6"] },
];

export const anomalies: AnomalyDoc[] = [
  { kind: "HIDDEN_FORMULA", cell: "Main!D6", severity: "WARN", context: "Main!D6 holds a hidden formula" },
  { kind: "EXTERNAL_REF", cell: "Main!D6", severity: "ALERT", context: "Main!D6 references external book(s) Ext" },
  { kind: "NEAR_CLONE", cell: "Main!B5", severity: "WARN", context: "Main!B5 is a lone variant of the 3-cell area" },
];

export const roles: RolesDoc = {
  roles: {
    "Main!A1": "LABEL",
    "Main!B1": "INPUT",
    "Main!B2": "OUTPUT",
    "Main!B3": "OUTPUT",
    "Main!B4": "OUTPUT",
    "Main!B5": "OUTPUT",
    "Main!D6": "OUTPUT",
  },
  warnings: [],
};

export const intervals: IntervalsDoc = {
  verdicts: [
    { cell: "Main!B2", computed: [0, 400], expected: [0, 300], actual: 200, status: "BORDERLINE" },
  ],
  policy_errors: [],
  unasserted_inputs: [],
};

export const sealMatch: SealDoc = {
  digest: "abcdef0123456789",
  manifest: null,
  status: "MATCH",
  diff: [],
};

export const sealMismatch: SealDoc = {
  digest: "abcdef0123456789",
  manifest: null,
  status: "MISMATCH",
  diff: ["changed Main!B5", "added Main!D6"],
};
