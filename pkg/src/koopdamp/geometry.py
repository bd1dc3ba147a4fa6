"""Room geometry: cell grid, PTAC/probe placement, boundary labeling.

The room is discretized into nx*ny rectangular cells; arrays are indexed
[i, j] with i along the width (x) and j along the depth (y). Boundary
conditions are attached to the four edges of the grid, one label per boundary
cell per outward direction: corner cells take their x-ghost from the
left/right edge and their y-ghost from the bottom/top edge.
"""

from dataclasses import dataclass, field

from .errors import ConfigurationError

WALL = "wall"
WINDOW = "window"
DOOR = "door"
BOUNDARY_KINDS = (WALL, WINDOW, DOOR)

# Edge name -> (axis, side). "bottom"/"top" run along x (length nx),
# "left"/"right" along y (length ny).
EDGES = ("left", "right", "bottom", "top")


def default_boundary(nx: int, ny: int) -> dict:
    """Default labeling: window along both long edges and the right short
    edge, a two-cell door at the left end of the top edge, wall elsewhere.
    The asymmetric layout matters: it staggers the local heat balance of
    the four conditioners, which keeps the probe channels from collapsing
    onto a single synchronized signal."""
    top = [WINDOW] * nx
    top[0] = DOOR
    top[1] = DOOR
    return {
        "left": tuple([WALL] * ny),
        "right": tuple([WINDOW] * ny),
        "bottom": tuple([WINDOW] * nx),
        "top": tuple(top),
    }


@dataclass(frozen=True)
class RoomGeometry:
    """Grid geometry of the conditioned room.

    ``ptac_cells`` are the outlet cells of AC-1..AC-4 and ``probe_cells``
    the four temperature probes paired with them, all strictly interior.
    The defaults stagger the conditioners in depth and the probes one to
    two cells from their outlets so the four measured channels carry phase
    diversity (a perfectly mirror-symmetric layout makes two channel pairs
    bit-identical and the oscillation unidentifiable).
    """

    width: float = 14.0
    depth: float = 7.0
    dx: float = 1.8
    dy: float = 1.35
    ptac_cells: tuple = ((1, 1), (2, 3), (4, 2), (6, 3))
    probe_cells: tuple = ((1, 3), (3, 1), (5, 3), (6, 1))
    boundary: dict = field(default=None)

    def __post_init__(self):
        if min(self.width, self.depth, self.dx, self.dy) <= 0:
            raise ConfigurationError("geometry lengths must be positive")
        if self.nx < 3 or self.ny < 3:
            raise ConfigurationError(
                f"grid too coarse: nx={self.nx}, ny={self.ny} (need >= 3)")
        if self.boundary is None:
            object.__setattr__(self, "boundary",
                               default_boundary(self.nx, self.ny))
        self._validate_cells()
        self._validate_boundary()

    @property
    def nx(self) -> int:
        return round(self.width / self.dx)

    @property
    def ny(self) -> int:
        return round(self.depth / self.dy)

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny)

    def _validate_cells(self):
        for name, cells in (("ptac", self.ptac_cells),
                            ("probe", self.probe_cells)):
            if len(cells) != 4:
                raise ConfigurationError(f"need exactly 4 {name} cells")
            for (i, j) in cells:
                if not (1 <= i <= self.nx - 2 and 1 <= j <= self.ny - 2):
                    raise ConfigurationError(
                        f"{name} cell ({i},{j}) not strictly inside the "
                        f"{self.nx}x{self.ny} grid")
        if len(set(self.ptac_cells)) != 4:
            raise ConfigurationError("ptac cells must be distinct")

    def _validate_boundary(self):
        lengths = {"left": self.ny, "right": self.ny,
                   "bottom": self.nx, "top": self.nx}
        for edge in EDGES:
            labels = self.boundary.get(edge)
            if labels is None:
                raise ConfigurationError(f"boundary edge '{edge}' unlabeled")
            if len(labels) != lengths[edge]:
                raise ConfigurationError(
                    f"boundary edge '{edge}' has {len(labels)} labels, "
                    f"expected {lengths[edge]}")
            for k, lab in enumerate(labels):
                if lab not in BOUNDARY_KINDS:
                    raise ConfigurationError(
                        f"boundary cell {edge}[{k}] has unknown label "
                        f"{lab!r}")

    def all_wall(self) -> "RoomGeometry":
        """Copy of this geometry with every edge relabeled as wall
        (zero-flux everywhere); used by conservation checks."""
        walls = {
            "left": tuple([WALL] * self.ny),
            "right": tuple([WALL] * self.ny),
            "bottom": tuple([WALL] * self.nx),
            "top": tuple([WALL] * self.nx),
        }
        return RoomGeometry(self.width, self.depth, self.dx, self.dy,
                            self.ptac_cells, self.probe_cells, walls)
