/**
 * Bias-config handling: byte-exact import/export, revisioned edits, diffs.
 *
 * An imported config keeps its original text; exporting an untouched
 * revision returns that text unchanged. Every edit produces a new revision
 * with a field-level diff, so an audit session reads as a chain of
 * assumption changes.
 */

export interface BiasConfig {
  dag_str: string;
  unob: string[];
  cond_nodes: string[];
  attribute_node: string;
  outcome_node: string;
  prediction_node: string;
  constraints: string[];
}

const CONFIG_FIELDS: (keyof BiasConfig)[] = [
  "dag_str",
  "unob",
  "cond_nodes",
  "attribute_node",
  "outcome_node",
  "prediction_node",
  "constraints",
];

export class ConfigError extends Error {}

export function parseConfig(text: string): BiasConfig {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new ConfigError(`invalid JSON: ${(err as Error).message}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ConfigError("config must be a JSON object");
  }
  const record = raw as Record<string, unknown>;
  for (const field of CONFIG_FIELDS) {
    if (!(field in record)) {
      throw new ConfigError(`missing field: ${field}`);
    }
  }
  for (const key of Object.keys(record)) {
    if (!CONFIG_FIELDS.includes(key as keyof BiasConfig)) {
      throw new ConfigError(`unknown field: ${key}`);
    }
  }
  const listFields = ["unob", "cond_nodes", "constraints"] as const;
  for (const field of listFields) {
    const value = record[field];
    if (!Array.isArray(value) || !value.every((x) => typeof x === "string")) {
      throw new ConfigError(`${field} must be a list of strings`);
    }
  }
  const strFields = ["dag_str", "attribute_node", "outcome_node", "prediction_node"] as const;
  for (const field of strFields) {
    if (typeof record[field] !== "string") {
      throw new ConfigError(`${field} must be a string`);
    }
  }
  return {
    dag_str: record.dag_str as string,
    unob: [...(record.unob as string[])],
    cond_nodes: [...(record.cond_nodes as string[])],
    attribute_node: record.attribute_node as string,
    outcome_node: record.outcome_node as string,
    prediction_node: record.prediction_node as string,
    constraints: [...(record.constraints as string[])],
  };
}

export function serializeConfig(config: BiasConfig): string {
  const ordered: Record<string, unknown> = {};
  for (const field of CONFIG_FIELDS) {
    ordered[field] = config[field];
  }
  return JSON.stringify(ordered, null, 4);
}

export interface Edge {
  parent: string;
  child: string;
}

export function parseEdgelist(text: string): Edge[] {
  const edges: Edge[] = [];
  for (const item of text.split(",")) {
    const piece = item.trim();
    if (piece === "") continue;
    const arrow = piece.indexOf("->");
    if (arrow < 0) {
      throw new ConfigError(`malformed edge: ${piece}`);
    }
    edges.push({
      parent: piece.slice(0, arrow).trim(),
      child: piece.slice(arrow + 2).trim(),
    });
  }
  return edges;
}

export function serializeEdgelist(edges: Edge[]): string {
  return edges.map((e) => `${e.parent}->${e.child}`).join(", ");
}

export interface ConfigDiff {
  edgesAdded: string[];
  edgesRemoved: string[];
  constraintsAdded: string[];
  constraintsRemoved: string[];
  fieldsChanged: string[];
}

export function diffConfigs(before: BiasConfig, after: BiasConfig): ConfigDiff {
  const edgeKey = (e: Edge) => `${e.parent}->${e.child}`;
  const beforeEdges = new Set(parseEdgelist(before.dag_str).map(edgeKey));
  const afterEdges = new Set(parseEdgelist(after.dag_str).map(edgeKey));
  const fieldsChanged: string[] = [];
  for (const field of ["attribute_node", "outcome_node", "prediction_node"] as const) {
    if (before[field] !== after[field]) fieldsChanged.push(field);
  }
  for (const field of ["unob", "cond_nodes"] as const) {
    if (before[field].join(",") !== after[field].join(",")) fieldsChanged.push(field);
  }
  return {
    edgesAdded: [...afterEdges].filter((e) => !beforeEdges.has(e)).sort(),
    edgesRemoved: [...beforeEdges].filter((e) => !afterEdges.has(e)).sort(),
    constraintsAdded: after.constraints.filter((c) => !before.constraints.includes(c)),
    constraintsRemoved: before.constraints.filter((c) => !after.constraints.includes(c)),
    fieldsChanged,
  };
}

export interface Revision {
  id: number;
  label: string;
  config: BiasConfig;
  /** original bytes when imported and untouched */
  sourceText: string | null;
  diff: ConfigDiff | null;
  parent: number | null;
}

export class ConfigWorkspace {
  private revisions: Revision[] = [];
  private nextId = 1;

  import(text: string, label = "imported"): Revision {
    const config = parseConfig(text);
    const revision: Revision = {
      id: this.nextId++,
      label,
      config,
      sourceText: text,
      diff: null,
      parent: null,
    };
    this.revisions.push(revision);
    return revision;
  }

  get(id: number): Revision {
    const found = this.revisions.find((r) => r.id === id);
    if (!found) throw new ConfigError(`unknown revision ${id}`);
    return found;
  }

  all(): Revision[] {
    return [...this.revisions];
  }

  /** Byte-identical for untouched imports; canonical otherwise. */
  export(id: number): string {
    const revision = this.get(id);
    return revision.sourceText ?? serializeConfig(revision.config);
  }

  private derive(parent: Revision, config: BiasConfig, label: string): Revision {
    const revision: Revision = {
      id: this.nextId++,
      label,
      config,
      sourceText: null,
      diff: diffConfigs(parent.config, config),
      parent: parent.id,
    };
    this.revisions.push(revision);
    return revision;
  }

  edit(id: number, config: BiasConfig, label = "edited"): Revision {
    return this.derive(this.get(id), config, label);
  }

  toggleEdge(id: number, parent: string, child: string): Revision {
    const base = this.get(id);
    const edges = parseEdgelist(base.config.dag_str);
    const key = `${parent}->${child}`;
    const kept = edges.filter((e) => `${e.parent}->${e.child}` !== key);
    let label: string;
    if (kept.length === edges.length) {
      kept.push({ parent, child });
      label = `add ${key}`;
    } else {
      label = `drop ${key}`;
    }
    const config = { ...base.config, dag_str: serializeEdgelist(kept) };
    return this.derive(base, config, label);
  }

  addConstraint(id: number, constraint: string): Revision {
    const base = this.get(id);
    const config = {
      ...base.config,
      constraints: [...base.config.constraints, constraint],
    };
    return this.derive(base, config, `constrain: ${constraint}`);
  }

  removeConstraint(id: number, constraint: string): Revision {
    const base = this.get(id);
    const config = {
      ...base.config,
      constraints: base.config.constraints.filter((c) => c !== constraint),
    };
    return this.derive(base, config, `unconstrain: ${constraint}`);
  }
}
