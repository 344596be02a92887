// ChartSpec -> SVG with one hit-testable element per mark
// (data-element-id carries the stable mark id used by anchors).

import type { ChartPayload, Mark } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderChart(chart: ChartPayload, width = 220,
  height = 120): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.classList.add("chart", `chart-${chart.chart_kind}`);
  const marks = chart.marks;
  if (marks.length === 0) return svg;

  if (chart.chart_kind === "bar" || chart.chart_kind === "histogram") {
    const values = marks.map((m) => Number(m.value.count ?? m.value.value ?? 0));
    const top = Math.max(...values, 1);
    const bw = width / marks.length;
    marks.forEach((mark, i) => {
      const bh = (values[i]! / top) * (height - 14);
      const rect = document.createElementNS(SVG_NS, "rect");
      rect.setAttribute("x", String(i * bw + 1));
      rect.setAttribute("y", String(height - bh));
      rect.setAttribute("width", String(Math.max(bw - 2, 1)));
      rect.setAttribute("height", String(bh));
      decorate(rect, mark, `${mark.key}: ${values[i]}`);
      svg.appendChild(rect);
    });
  } else if (chart.chart_kind === "scatter") {
    const xs = marks.map((m) => Number(m.value.x));
    const ys = marks.map((m) => Number(m.value.y));
    const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
    const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
    const sx = (width - 12) / (x1 - x0 || 1);
    const sy = (height - 12) / (y1 - y0 || 1);
    for (const mark of marks) {
      const circle = document.createElementNS(SVG_NS, "circle");
      circle.setAttribute("cx", String(6 + (Number(mark.value.x) - x0) * sx));
      circle.setAttribute("cy", String(height - 6 - (Number(mark.value.y) - y0) * sy));
      circle.setAttribute("r", "4");
      decorate(circle, mark, `(${mark.value.x}, ${mark.value.y})`);
      svg.appendChild(circle);
    }
  } else {
    const top = Math.max(...marks.map((m) => Number(m.value.count ?? 1)), 1);
    let y = 14;
    for (const mark of marks.slice(0, 10)) {
      const text = document.createElementNS(SVG_NS, "text");
      text.setAttribute("x", "4");
      text.setAttribute("y", String(y));
      const size = 8 + 9 * (Number(mark.value.count ?? 1) / top);
      text.setAttribute("font-size", String(size));
      text.textContent = mark.key;
      decorate(text, mark, `${mark.key}: ${mark.value.count}`);
      svg.appendChild(text);
      y += size + 2;
      if (y > height) break;
    }
  }
  return svg;
}

function decorate(el: SVGElement, mark: Mark, tooltip: string): void {
  el.classList.add("mark");
  el.dataset.elementId = mark.element_id;
  el.dataset.level = String(mark.lineage.length > 1 ? 2 : 1);
  const title = document.createElementNS(SVG_NS, "title");
  title.textContent = tooltip;
  el.appendChild(title);
}
