/**
 * Workspace wiring: config editor with revisions, data upload, analysis
 * launcher, and result charts. All numbers come from service documents.
 */

import { FragilityClient, MetricInfo, ResultDocument, TableResponse } from "./api.js";
import { bandWidths, heatmapSvg, sweepBandSvg } from "./charts.js";
import { ConfigWorkspace, Revision, parseConfig, serializeConfig } from "./config.js";
import { pollAnalysis } from "./poll.js";

declare const document: Document;

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

class Workspace {
  private client = new FragilityClient("");
  private configs = new ConfigWorkspace();
  private activeRevision: Revision | null = null;
  private table: TableResponse | null = null;
  private metrics: MetricInfo[] = [];
  private documents: { label: string; document: ResultDocument }[] = [];

  private editor = el<HTMLTextAreaElement>("config-editor");
  private revisionList = el<HTMLUListElement>("revision-list");
  private validation = el<HTMLElement>("validation");
  private dataSummary = el<HTMLElement>("data-summary");
  private chartArea = el<HTMLElement>("chart-area");
  private statusLine = el<HTMLElement>("status-line");
  private metricSelect = el<HTMLSelectElement>("metric-select");

  async start(): Promise<void> {
    try {
      this.metrics = (await this.client.metrics()).metrics;
      this.metricSelect.innerHTML = this.metrics
        .map((m) => `<option value="${m.name}">${m.name}</option>`)
        .join("");
    } catch {
      this.statusLine.textContent = "service unreachable; start `fragility serve`";
    }
    el<HTMLButtonElement>("import-config").addEventListener("click", () => this.importConfig());
    el<HTMLButtonElement>("export-config").addEventListener("click", () => this.exportConfig());
    el<HTMLButtonElement>("apply-edit").addEventListener("click", () => this.applyEdit());
    el<HTMLButtonElement>("toggle-edge").addEventListener("click", () => this.toggleEdge());
    el<HTMLButtonElement>("add-constraint").addEventListener("click", () => this.addConstraint());
    el<HTMLButtonElement>("upload-table").addEventListener("click", () => this.uploadTable());
    el<HTMLButtonElement>("run-analysis").addEventListener("click", () => this.runAnalysis());
    el<HTMLButtonElement>("clear-charts").addEventListener("click", () => {
      this.documents = [];
      this.renderCharts();
    });
  }

  private setRevision(revision: Revision): void {
    this.activeRevision = revision;
    this.editor.value = this.configs.export(revision.id);
    this.renderRevisions();
    void this.validate(revision);
  }

  private async validate(revision: Revision): Promise<void> {
    try {
      const result = await this.client.validateConfig(revision.config);
      if (result.valid && result.scheme_dims) {
        const dims = result.scheme_dims.blocks
          .map((b) => `{${b.nodes.join(",")}}:${b.dim}`)
          .join("  ");
        this.validation.textContent =
          `valid; total_dim=${result.scheme_dims.total_dim}  ${dims}\n` +
          `projected: ${result.projected_edgelist ?? ""}`;
      } else {
        this.validation.textContent = `invalid: ${(result.errors ?? []).join("; ")}`;
      }
    } catch (err) {
      this.validation.textContent = `validation error: ${(err as Error).message}`;
    }
  }

  private importConfig(): void {
    try {
      const revision = this.configs.import(this.editor.value);
      this.setRevision(revision);
    } catch (err) {
      this.validation.textContent = (err as Error).message;
    }
  }

  private exportConfig(): void {
    if (!this.activeRevision) return;
    const text = this.configs.export(this.activeRevision.id);
    const blob = new Blob([text], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "bias-config.json";
    link.click();
  }

  private applyEdit(): void {
    if (!this.activeRevision) {
      this.importConfig();
      return;
    }
    try {
      const config = parseConfig(this.editor.value);
      if (serializeConfig(config) === serializeConfig(this.activeRevision.config)) {
        return; // no change, no new revision
      }
      this.setRevision(this.configs.edit(this.activeRevision.id, config));
    } catch (err) {
      this.validation.textContent = (err as Error).message;
    }
  }

  private toggleEdge(): void {
    if (!this.activeRevision) return;
    const spec = el<HTMLInputElement>("edge-input").value.trim();
    const arrow = spec.indexOf("->");
    if (arrow < 0) {
      this.validation.textContent = "edge must look like U->Y";
      return;
    }
    const revision = this.configs.toggleEdge(
      this.activeRevision.id,
      spec.slice(0, arrow).trim(),
      spec.slice(arrow + 2).trim(),
    );
    this.setRevision(revision);
  }

  private addConstraint(): void {
    if (!this.activeRevision) return;
    const text = el<HTMLInputElement>("constraint-input").value.trim();
    if (!text) return;
    this.setRevision(this.configs.addConstraint(this.activeRevision.id, text));
  }

  private renderRevisions(): void {
    this.revisionList.innerHTML = this.configs
      .all()
      .map((r) => {
        const active = this.activeRevision?.id === r.id ? " (active)" : "";
        const diff = r.diff
          ? [
              ...r.diff.edgesAdded.map((e) => `+${e}`),
              ...r.diff.edgesRemoved.map((e) => `-${e}`),
              ...r.diff.constraintsAdded.map((c) => `+[${c}]`),
              ...r.diff.constraintsRemoved.map((c) => `-[${c}]`),
            ].join(" ")
          : "";
        return `<li data-revision="${r.id}">r${r.id} ${r.label}${active} <small>${diff}</small></li>`;
      })
      .join("");
    for (const item of Array.from(this.revisionList.querySelectorAll("li"))) {
      item.addEventListener("click", () => {
        const id = Number(item.getAttribute("data-revision"));
        this.setRevision(this.configs.get(id));
      });
    }
  }

  private async uploadTable(): Promise<void> {
    const csv = el<HTMLTextAreaElement>("csv-input").value;
    try {
      this.table = await this.client.uploadTable(csv);
      const empirical = Object.entries(this.table.empirical)
        .map(([k, v]) => `${k}=${v === null ? "n/a" : v.toFixed(4)}`)
        .join("  ");
      this.dataSummary.textContent =
        `table ${this.table.table_id} (${this.table.total} rows)\n${empirical}`;
    } catch (err) {
      this.dataSummary.textContent = `upload failed: ${(err as Error).message}`;
    }
  }

  private async runAnalysis(): Promise<void> {
    if (!this.activeRevision || !this.table) {
      this.statusLine.textContent = "import a config and upload a table first";
      return;
    }
    const deltas = el<HTMLInputElement>("deltas-input")
      .value.split(",")
      .map((x) => Number(x.trim()))
      .filter((x) => !Number.isNaN(x));
    const metric = this.metricSelect.value;
    const revision = this.activeRevision;
    try {
      const { analysis_id } = await this.client.submitAnalysis({
        config: revision.config,
        table_id: this.table.table_id,
        metric,
        deltas,
        seed: 0,
        options: { max_nodes: Number(el<HTMLInputElement>("nodes-input").value) || 120 },
      });
      this.statusLine.textContent = `analysis ${analysis_id} running...`;
      const final = await pollAnalysis(this.client, analysis_id, {
        onUpdate: (status) => {
          this.statusLine.textContent =
            `analysis ${analysis_id}: ${status.status}, ${status.partial.length}/${deltas.length} certified`;
        },
      });
      if (final.status === "done" && final.document) {
        this.documents.push({ label: `r${revision.id} ${metric}`, document: final.document });
        this.renderCharts();
      } else {
        this.statusLine.textContent = `analysis ${analysis_id}: ${final.status} ${final.error ?? ""}`;
      }
    } catch (err) {
      this.statusLine.textContent = `analysis failed: ${(err as Error).message}`;
    }
  }

  private renderCharts(): void {
    if (this.documents.length === 0) {
      this.chartArea.innerHTML = "";
      return;
    }
    const pieces: string[] = [];
    const bandSeries = this.documents
      .filter(({ document: doc }) => !Array.isArray(doc.deltas[0]))
      .map(({ label, document: doc }) => ({ label, rows: doc.results }));
    if (bandSeries.length > 0) {
      pieces.push(
        sweepBandSvg(bandSeries, { title: "certified bounds vs budget" }),
        "<pre>" +
          bandSeries
            .map((s) => `${s.label}: widths ${bandWidths(s.rows).map((w) => w.toFixed(4)).join(", ")}`)
            .join("\n") +
          "</pre>",
      );
    }
    for (const { label, document: doc } of this.documents) {
      if (Array.isArray(doc.deltas[0])) {
        pieces.push(heatmapSvg(doc.results, { title: `${label} upper bounds` }));
      }
    }
    this.chartArea.innerHTML = pieces.join("\n");
  }
}

if (typeof document !== "undefined" && document.getElementById("config-editor")) {
  const workspace = new Workspace();
  void workspace.start();
}
