/** Version history view: the iteration tree as nested lists of thumbnails.
 * Clicking any node selects it as the active refinement base. */

import { buildTree, type TreeNode } from '../tree.js';
import type { ApiClient } from '../api.js';
import type { TreeResponse } from '../types.js';

export interface TreeViewHandlers {
  onSelect?: (nodeId: string) => void;
}

export function renderTreeView(
  container: HTMLElement,
  api: ApiClient,
  tree: TreeResponse,
  handlers: TreeViewHandlers = {},
): void {
  container.replaceChildren();
  const roots = buildTree(tree);
  container.appendChild(renderLevel(roots, api, tree.active_node_id, handlers));
}

function renderLevel(
  nodes: TreeNode[],
  api: ApiClient,
  activeId: string | null,
  handlers: TreeViewHandlers,
): HTMLUListElement {
  const list = document.createElement('ul');
  list.className = 'tree-level';
  for (const node of nodes) {
    const item = document.createElement('li');
    item.className = 'tree-node';
    item.dataset.nodeId = node.payload.node_id;
    item.dataset.method = node.payload.method;
    if (node.payload.node_id === activeId) {
      item.classList.add('active');
    }

    const thumb = document.createElement('img');
    thumb.className = 'tree-thumb';
    thumb.src = api.imageUrl(node.payload.image_url);
    thumb.alt = `${node.payload.method} ${node.payload.node_id}`;
    thumb.addEventListener('click', () => handlers.onSelect?.(node.payload.node_id));
    item.appendChild(thumb);

    if (node.children.length > 0) {
      item.appendChild(renderLevel(node.children, api, activeId, handlers));
    }
    list.appendChild(item);
  }
  return list;
}
