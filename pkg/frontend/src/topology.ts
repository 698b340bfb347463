// Topology view: nodes, the serial highway with its crate chain, local
// crates, and which node currently homes each database. Re-renders whenever
// the directory version changes, so a migration visibly moves the database.

import { DirectoryDoc } from "./protocol.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el(tag: string, attrs: Record<string, string | number>, text?: string) {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  if (text !== undefined) node.textContent = text;
  return node;
}

export class TopologyView {
  constructor(private root: HTMLElement) {}

  render(doc: DirectoryDoc | null): void {
    this.root.textContent = "";
    if (!doc) return;
    const nodes = Object.keys(doc.nodes).sort();
    const width = 760;
    const height = 150 + nodes.length * 120;
    const svg = el("svg", { width, height, class: "topology" });
    svg.appendChild(el("text", { x: 10, y: 20, class: "topo-title" },
      `directory v${doc.version}`));

    const dbsByNode = new Map<string, string[]>();
    for (const [db, home] of Object.entries(doc.databases)) {
      const list = dbsByNode.get(home.node) ?? [];
      list.push(db);
      dbsByNode.set(home.node, list);
    }

    nodes.forEach((name, i) => {
      const y = 50 + i * 120;
      const isHighwayNode = doc.topology.highway?.node === name;
      const group = el("g", { class: "topo-node", "data-node": name });
      group.appendChild(el("rect", {
        x: 10, y, width: 150, height: 70, rx: 8,
        class: isHighwayNode ? "node-box central" : "node-box",
      }));
      group.appendChild(el("text", { x: 85, y: y + 25, "text-anchor": "middle",
                                     class: "node-name" }, name));
      const dbs = (dbsByNode.get(name) ?? []).sort();
      dbs.forEach((db, j) => {
        group.appendChild(el("rect", {
          x: 20 + j * 65, y: y + 38, width: 58, height: 22, rx: 4,
          class: "db-box", "data-db": db,
        }));
        group.appendChild(el("text", {
          x: 49 + j * 65, y: y + 53, "text-anchor": "middle", class: "db-name",
          "data-db-label": db,
        }, db));
      });

      if (isHighwayNode && doc.topology.highway) {
        const crates = doc.topology.highway.crates;
        svg.appendChild(el("line", { x1: 160, y1: y + 35, x2: 210, y2: y + 35,
                                     class: "highway-line" }));
        svg.appendChild(el("text", { x: 215, y: y + 8, class: "bus-label" },
          `serial highway (${crates.length} crates)`));
        crates.forEach((crate, j) => {
          const cx = 215 + (j % 9) * 58;
          const cy = y + 14 + Math.floor(j / 9) * 30;
          svg.appendChild(el("rect", { x: cx, y: cy, width: 50, height: 22, rx: 3,
                                       class: "crate-box" }));
          svg.appendChild(el("text", { x: cx + 25, y: cy + 15,
                                       "text-anchor": "middle", class: "crate-label" },
            `C${crate}`));
        });
      }
      const local = doc.topology.local_crates?.[name] ?? [];
      local.forEach((crate, j) => {
        const cx = 215 + j * 58;
        svg.appendChild(el("line", { x1: 160, y1: y + 35, x2: cx, y2: y + 25,
                                     class: "local-line" }));
        svg.appendChild(el("rect", { x: cx, y: y + 14, width: 50, height: 22, rx: 3,
                                     class: "crate-box local" }));
        svg.appendChild(el("text", { x: cx + 25, y: y + 29,
                                     "text-anchor": "middle", class: "crate-label" },
          `C${crate}`));
      });
      svg.appendChild(group);
    });
    this.root.appendChild(svg);
  }
}
