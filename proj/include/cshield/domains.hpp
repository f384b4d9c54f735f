#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cshield/pomdp.hpp"

namespace cshield {

enum class Family { obstacle, refuel, evade, intercept };

std::string_view to_string(Family f);
Family parse_family(std::string_view text);

struct GridSpec {
    Family family = Family::obstacle;
    int n = 8;
    int extra = 0;  // energy capacity (refuel) or radius (evade, intercept)

    std::string name() const;
};

/// "obstacle 8", "refuel 6 8", "evade6_2", ...
GridSpec parse_grid_spec(std::string_view text);

/// n x n cells plus a sink. Traps at (1,1) (1,0) (1,3) (n-2,0) (n-2,n-2);
/// initial cells (n-3,n-2) (n-3,n-3) (n-4,n-2) (1,2), with (n-2,n-3) in
/// place of (n-3,n-3) when n = 6; exit (0,0).
/// Moves go one cell (weight 0.9) or two (0.1), clamped at the border.
Pomdp gen_obstacle(int n);

/// Cells x energy levels 0..e-1 plus a sink. Stations at (0,0), (n-1,0),
/// (0,n-1); obstacles on the anti-diagonal strictly between them; goal at
/// (n-1,n-1). Observations blur position to 2x2 blocks and battery to
/// low/high.
Pomdp gen_refuel(int n, int e);

/// Agent cell x robot cell x scanned flag plus a sink. The robot lives on
/// cells with odd coordinates and moves exactly two cells per step. It is
/// observed within Manhattan radius r or right after a scan.
Pomdp gen_evade(int n, int r);

/// Agent cell x robot cell plus a sink. The robot starts in column 0 and
/// stays or moves right each step; it is observed in the middle column or
/// within radius r. Catching it is the goal, letting it reach column n-1
/// is a violation.
Pomdp gen_intercept(int n, int r);

Pomdp generate(const GridSpec& spec);

}  // namespace cshield
