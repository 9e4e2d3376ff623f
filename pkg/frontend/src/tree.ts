/** Iteration-tree model built from the flat node list the API returns.
 * Node order is creation order; children keep that order under each parent. */

import type { NodePayload, TreeResponse } from './types.js';

export interface TreeNode {
  payload: NodePayload;
  children: TreeNode[];
}

export function buildTree(tree: TreeResponse): TreeNode[] {
  const byId = new Map<string, TreeNode>();
  const roots: TreeNode[] = [];
  for (const payload of tree.nodes) {
    const node: TreeNode = { payload, children: [] };
    byId.set(payload.node_id, node);
    if (payload.parent_id === null) {
      roots.push(node);
    } else {
      const parent = byId.get(payload.parent_id);
      if (!parent) {
        throw new Error(`node ${payload.node_id} references missing parent ${payload.parent_id}`);
      }
      parent.children.push(node);
    }
  }
  return roots;
}

export function countNodes(roots: TreeNode[]): number {
  let count = 0;
  const stack = [...roots];
  while (stack.length > 0) {
    const node = stack.pop()!;
    count += 1;
    stack.push(...node.children);
  }
  return count;
}
