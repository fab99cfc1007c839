#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace matchfit {

/// 10-character Open Location Code (Plus Code) of a WGS84 coordinate.
/// Standard OLC alphabet; latitude clipped, longitude normalized; cells are
/// half-open so a point on a boundary encodes into the containing cell.
inline std::string plus_code(double lat, double lng) {
    static constexpr char kAlphabet[] = "23456789CFGHJMPQRVWX";
    constexpr double kGridDenom = 8000.0;  // finest pair resolution of a 10-digit code

    lat = std::min(90.0, std::max(-90.0, lat));
    while (lng < -180.0) lng += 360.0;
    while (lng >= 180.0) lng -= 360.0;
    if (lat == 90.0) lat -= 1.0 / kGridDenom;  // keep the pole inside the last row

    std::int64_t la = static_cast<std::int64_t>(std::floor((lat + 90.0) * kGridDenom));
    std::int64_t lo = static_cast<std::int64_t>(std::floor((lng + 180.0) * kGridDenom));
    la = std::min<std::int64_t>(la, 180 * 8000 - 1);
    lo = std::min<std::int64_t>(lo, 360 * 8000 - 1);

    char digits[10];
    for (int pair = 4; pair >= 0; --pair) {
        digits[2 * pair] = kAlphabet[la % 20];
        digits[2 * pair + 1] = kAlphabet[lo % 20];
        la /= 20;
        lo /= 20;
    }
    std::string code(digits, digits + 8);
    code += '+';
    code.append(digits + 8, digits + 10);
    return code;
}

}  // namespace matchfit
