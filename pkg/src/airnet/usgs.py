"""Catalog client for USGS-style elevation product endpoints.

Strictly a catalog/download client: it finds products whose bounding boxes
intersect a query rectangle and can fetch their payloads. It never decodes
point data and the core pipeline never requires it. Responses are cached on
disk keyed by endpoint and query bbox; the cache directory defaults to
``$AIRNET_CACHE_DIR`` (falling back to ``~/.cache/airnet/usgs``).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

Bbox = tuple[float, float, float, float]  # (min_x, min_y, max_x, max_y)


class UsgsError(Exception):
    pass


class TransportError(UsgsError):
    """The endpoint could not be reached or answered with a failure status."""


class DecodeError(UsgsError):
    """The catalog response was not in the expected shape."""


class NetworkDisabled(UsgsError):
    """Offline mode is set; no socket use is allowed."""


@dataclass(frozen=True)
class ProductDescriptor:
    title: str
    download_url: str
    bbox: Bbox


def _boxes_intersect(a: Bbox, b: Bbox) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _default_transport(url: str, params: dict) -> str:
    import requests  # deferred: only needed when actually going to the network

    try:
        response = requests.get(url, params=params, timeout=60)
    except requests.RequestException as err:
        raise TransportError(f"GET {url} failed: {err}") from err
    if response.status_code != 200:
        raise TransportError(f"GET {url} returned HTTP {response.status_code}")
    return response.text


class UsgsClient:
    """Fetch catalog entries intersecting a bbox, with a synchronized disk cache."""

    def __init__(
        self,
        endpoint: str,
        cache_dir=None,
        offline: bool = False,
        transport: Callable[[str, dict], str] | None = None,
    ):
        self.endpoint = endpoint
        if cache_dir is None:
            cache_dir = os.environ.get("AIRNET_CACHE_DIR") or Path.home() / ".cache" / "airnet" / "usgs"
        self.cache_dir = Path(cache_dir)
        self.offline = offline
        self.transport = transport or _default_transport
        self._lock = threading.Lock()

    def _cache_path(self, bbox: Bbox) -> Path:
        key = hashlib.sha256(f"{self.endpoint}|{bbox}".encode()).hexdigest()[:24]
        return self.cache_dir / f"catalog_{key}.json"

    def fetch_products(self, bbox) -> list[ProductDescriptor]:
        """Catalog entries intersecting ``bbox``, from cache when available.

        Offline mode refuses outright, even on a cache hit: the flag promises
        that no network-derived data flows at all.
        """
        if self.offline:
            raise NetworkDisabled("network disabled")
        bbox = tuple(float(v) for v in bbox)
        if len(bbox) != 4 or bbox[0] > bbox[2] or bbox[1] > bbox[3]:
            raise ValueError(f"bbox must be (min_x, min_y, max_x, max_y), got {bbox}")

        cache_path = self._cache_path(bbox)
        with self._lock:
            if cache_path.exists():
                entries = json.loads(cache_path.read_text())
                return [ProductDescriptor(e["title"], e["download_url"], tuple(e["bbox"])) for e in entries]

        text = self.transport(self.endpoint, {"bbox": ",".join(str(v) for v in bbox)})
        products = _parse_catalog(text)
        hits = [p for p in products if _boxes_intersect(p.bbox, bbox)]

        with self._lock:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            payload = json.dumps(
                [{"title": p.title, "download_url": p.download_url, "bbox": list(p.bbox)} for p in hits]
            )
            fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
            with os.fdopen(fd, "w") as fh:
                fh.write(payload)
            os.replace(tmp, cache_path)
        return hits

    def download(self, product: ProductDescriptor, dest_dir) -> Path:
        """Fetch a product payload to ``dest_dir``; returns the written path."""
        if self.offline:
            raise NetworkDisabled("network disabled")
        dest_dir = Path(dest_dir)
        dest_dir.mkdir(parents=True, exist_ok=True)
        name = product.download_url.rstrip("/").rsplit("/", 1)[-1] or "product.bin"
        dest = dest_dir / name

        import requests

        try:
            response = requests.get(product.download_url, timeout=300)
        except requests.RequestException as err:
            raise TransportError(f"GET {product.download_url} failed: {err}") from err
        if response.status_code != 200:
            raise TransportError(f"GET {product.download_url} returned HTTP {response.status_code}")
        dest.write_bytes(response.content)
        return dest


def _parse_catalog(text: str) -> list[ProductDescriptor]:
    try:
        doc = json.loads(text)
        items = doc["items"]
        return [
            ProductDescriptor(
                title=str(item["title"]),
                download_url=str(item["downloadURL"]),
                bbox=(
                    float(item["boundingBox"]["minX"]),
                    float(item["boundingBox"]["minY"]),
                    float(item["boundingBox"]["maxX"]),
                    float(item["boundingBox"]["maxY"]),
                ),
            )
            for item in items
        ]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise DecodeError(f"malformed catalog response: {err}") from err


def fetch_usgs_products(
    bbox,
    endpoint: str,
    *,
    cache_dir=None,
    offline: bool = False,
    transport: Callable[[str, dict], str] | None = None,
) -> list[ProductDescriptor]:
    """One-shot catalog query; see UsgsClient.fetch_products."""
    client = UsgsClient(endpoint, cache_dir=cache_dir, offline=offline, transport=transport)
    return client.fetch_products(bbox)
