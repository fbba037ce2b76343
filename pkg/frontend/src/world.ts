/** World geometry fetched once from the mirror's HTTP side. */

import type { RobotPose } from "./events.js";

export interface WorldGeometry {
  width: number;
  height: number;
  cell_size: number;
  static_obstacles: [number, number][];
  dynamic_obstacles: [number, number][];
  robot_pose: RobotPose;
}

export async function fetchWorld(baseUrl: string): Promise<WorldGeometry | null> {
  const response = await fetch(`${baseUrl}/world`);
  if (response.status === 404) {
    return null; // the run has no world attached
  }
  if (!response.ok) {
    throw new Error(`GET /world failed: ${response.status}`);
  }
  return (await response.json()) as WorldGeometry;
}

export type Cell = "free" | "wall";

export function gridCells(geometry: WorldGeometry): Cell[][] {
  const rows: Cell[][] = [];
  const walls = new Set(geometry.static_obstacles.map(([c, r]) => `${c},${r}`));
  for (let r = 0; r < geometry.height; r++) {
    const row: Cell[] = [];
    for (let c = 0; c < geometry.width; c++) {
      row.push(walls.has(`${c},${r}`) ? "wall" : "free");
    }
    rows.push(row);
  }
  return rows;
}

export function cellOfPose(geometry: WorldGeometry, pose: RobotPose): [number, number] {
  return [Math.round(pose.x / geometry.cell_size), Math.round(pose.y / geometry.cell_size)];
}
