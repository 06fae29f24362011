#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "mtrl/bounds.hpp"
#include "mtrl/datagen.hpp"
#include "mtrl/diagnostics.hpp"
#include "mtrl/erm.hpp"
#include "mtrl/mixing.hpp"
#include "mtrl/types.hpp"

namespace mtrl {

using Json = nlohmann::json;

/// {"rows": r, "cols": c, "data": [row-major entries]}.
Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json to_json(const Representation& rep);
Json to_json(const CovariateLaw& law);
Json to_json(const erm::FirstStageFit& fit);
Json to_json(const erm::SecondStageFit& fit);
/// Scalars use the names mu_x, mu_f, nu_true, nu_hat, sigma_u_sq, sigma_v_sq,
/// c_z, h_z, h_v; Undefined values are JSON null.
Json to_json(const diagnostics::DiagnosticsReport& report);
/// {kind, phi[] | (gamma, rho), phi_capital}.
Json to_json(const mixing::MixingProfile& profile);
Json to_json(const bounds::BoundReport& report);

/// Dims, seed, per-task seeds, sample counts and law descriptions.
Json dataset_manifest(const datagen::SampleRequest& req);

}  // namespace mtrl
