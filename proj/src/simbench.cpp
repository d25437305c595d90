#include "robotest/simbench.hpp"

#include <cmath>
#include <deque>
#include <fstream>

#include <json.hpp>

#include "robotest/error.hpp"
#include "robotest/glyphs.hpp"
#include "robotest/rng.hpp"

using nlohmann::json;

namespace robotest::simbench {

bool MaskShape::contains(const Vec2& p) const {
    if (kind == Kind::Rect) return bounds.contains(p);
    double rx = bounds.w / 2.0, ry = bounds.h / 2.0;
    if (rx <= 0 || ry <= 0) return false;
    double nx = (p.x - (bounds.x + rx)) / rx;
    double ny = (p.y - (bounds.y + ry)) / ry;
    return nx * nx + ny * ny <= 1.0;
}

bool DeviceProfile::in_mask(const Vec2& device_px) const {
    for (const auto& m : mask)
        if (m.contains(device_px)) return true;
    return false;
}

DeviceProfile DeviceProfile::without_mask() const {
    DeviceProfile out = *this;
    out.mask.clear();
    out.id = id + "-ref";
    return out;
}

Vec2 DeviceProfile::world_from_device_px(const Vec2& px) const {
    Vec2 local{px.x * mm_per_px(), px.y * mm_per_px()};
    return placement_origin_mm + local.rotated(placement_deflection_rad);
}

Vec2 DeviceProfile::device_px_from_world(const Vec2& world_mm) const {
    Vec2 local = (world_mm - placement_origin_mm).rotated(-placement_deflection_rad);
    return {local.x / mm_per_px(), local.y / mm_per_px()};
}

void DeviceProfile::place_center(const Vec2& center_world) {
    Vec2 half{screen_w_mm / 2.0, screen_h_mm / 2.0};
    placement_origin_mm = center_world - half.rotated(placement_deflection_rad);
}

void DeviceProfile::validate() const {
    if (screen_w_mm <= 0 || screen_h_mm <= 0 || res_x <= 0 || res_y <= 0)
        raise(ErrorCode::ConfigError, "device '" + id + "' has non-positive dimensions");
    double aspect_mm = screen_w_mm / screen_h_mm;
    double aspect_px = static_cast<double>(res_x) / res_y;
    if (std::abs(aspect_mm - aspect_px) / aspect_px > 0.01)
        raise(ErrorCode::ConfigError, "device '" + id + "' resolution aspect mismatch > 1%");
    Rect screen{0, 0, res_x, res_y};
    for (const auto& m : mask)
        if (!screen.contains(m.bounds))
            raise(ErrorCode::ConfigError, "device '" + id + "' mask leaves the screen");
}

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise(ErrorCode::ConfigError, "bad json in " + path + ": " + e.what());
    }
    return j;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path);
    out << j.dump(2) << "\n";
}

Rect rect_from_json(const json& j) {
    return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

json rect_to_json(const Rect& r) { return json::array({r.x, r.y, r.w, r.h}); }

constexpr int kSchemaVersion = 1;

} // namespace

DeviceProfile DeviceProfile::load_json(const std::string& path) {
    json j = load_json_file(path);
    if (j.value("schema_version", 0) != kSchemaVersion)
        raise(ErrorCode::ConfigError, "unsupported device schema in " + path);
    DeviceProfile d;
    d.id = j.at("id").get<std::string>();
    d.screen_w_mm = j.at("screen_mm").at(0).get<double>();
    d.screen_h_mm = j.at("screen_mm").at(1).get<double>();
    d.res_x = j.at("resolution").at(0).get<int>();
    d.res_y = j.at("resolution").at(1).get<int>();
    const auto& placement = j.at("placement");
    d.placement_origin_mm = {placement.at("origin_mm").at(0).get<double>(),
                             placement.at("origin_mm").at(1).get<double>()};
    d.placement_deflection_rad = deg_to_rad(placement.value("deflection_deg", 0.0));
    for (const auto& m : j.value("mask", json::array())) {
        MaskShape shape;
        shape.kind = m.at("shape").get<std::string>() == "ellipse" ? MaskShape::Kind::Ellipse
                                                                   : MaskShape::Kind::Rect;
        shape.bounds = rect_from_json(m.at("bounds"));
        d.mask.push_back(shape);
    }
    d.validate();
    return d;
}

void DeviceProfile::save_json(const std::string& path) const {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["id"] = id;
    j["screen_mm"] = {screen_w_mm, screen_h_mm};
    j["resolution"] = {res_x, res_y};
    j["placement"] = {{"origin_mm", {placement_origin_mm.x, placement_origin_mm.y}},
                      {"deflection_deg", rad_to_deg(placement_deflection_rad)}};
    json masks = json::array();
    for (const auto& m : mask)
        masks.push_back({{"shape", m.kind == MaskShape::Kind::Ellipse ? "ellipse" : "rect"},
                         {"bounds", rect_to_json(m.bounds)}});
    j["mask"] = masks;
    write_json_file(j, path);
}

const ModelWidget* ScreenDef::find_widget(const std::string& id) const {
    for (const auto& w : widgets)
        if (w.id == id) return &w;
    return nullptr;
}

void AppModel::validate() const {
    if (screens.find(initial_screen) == screens.end())
        raise(ErrorCode::ConfigError, "app '" + name + "': initial screen missing");
    for (const auto& [key, to] : transitions) {
        auto it = screens.find(key.screen);
        if (it == screens.end())
            raise(ErrorCode::ConfigError, "app '" + name + "': transition from unknown screen");
        if (!key.widget.empty() && !it->second.find_widget(key.widget))
            raise(ErrorCode::ConfigError,
                  "app '" + name + "': transition from unknown widget '" + key.widget + "'");
        if (screens.find(to) == screens.end())
            raise(ErrorCode::ConfigError, "app '" + name + "': transition to unknown screen");
    }
    for (const auto& key : crash_triggers) {
        auto it = screens.find(key.screen);
        if (it == screens.end() || (!key.widget.empty() && !it->second.find_widget(key.widget)))
            raise(ErrorCode::ConfigError, "app '" + name + "': crash trigger names unknown target");
    }
    for (const auto& [sname, screen] : screens) {
        std::set<std::string> ids;
        for (const auto& w : screen.widgets)
            if (!ids.insert(w.id).second)
                raise(ErrorCode::ConfigError,
                      "app '" + name + "': duplicate widget id '" + w.id + "' in " + sname);
    }
    // Reachability by graph search over the transition map.
    std::set<std::string> seen{initial_screen};
    std::deque<std::string> frontier{initial_screen};
    while (!frontier.empty()) {
        std::string cur = frontier.front();
        frontier.pop_front();
        for (const auto& [key, to] : transitions)
            if (key.screen == cur && seen.insert(to).second) frontier.push_back(to);
    }
    for (const auto& [sname, screen] : screens)
        if (!seen.count(sname))
            raise(ErrorCode::ConfigError, "app '" + name + "': screen '" + sname + "' unreachable");
}

AppModel AppModel::load_json(const std::string& path) {
    json j = load_json_file(path);
    if (j.value("schema_version", 0) != kSchemaVersion)
        raise(ErrorCode::ConfigError, "unsupported app schema in " + path);
    AppModel app;
    app.name = j.at("name").get<std::string>();
    app.initial_screen = j.at("initial_screen").get<std::string>();
    for (const auto& s : j.at("screens")) {
        ScreenDef screen;
        screen.name = s.at("name").get<std::string>();
        screen.background = static_cast<uint8_t>(s.value("background", 235));
        for (const auto& w : s.value("widgets", json::array())) {
            ModelWidget widget;
            widget.id = w.at("id").get<std::string>();
            widget.kind = w.at("kind").get<std::string>() == "text" ? vision::WidgetKind::Text
                                                                    : vision::WidgetKind::NonText;
            widget.bounds = rect_from_json(w.at("bounds"));
            widget.text = w.value("text", "");
            widget.text_scale = w.value("scale", 2);
            widget.clickable = w.value("clickable", true);
            widget.input = w.value("input", false);
            std::string style = w.value("style", "outline");
            widget.style = style == "filled" ? WidgetStyle::Filled
                           : style == "field" ? WidgetStyle::Field
                                              : WidgetStyle::Outline;
            screen.widgets.push_back(std::move(widget));
        }
        app.screens[screen.name] = std::move(screen);
    }
    for (const auto& t : j.value("transitions", json::array())) {
        TransitionKey key{t.at("screen").get<std::string>(), t.value("widget", ""),
                          kinematics::gesture_from_name(t.at("gesture").get<std::string>())};
        app.transitions[key] = t.at("to").get<std::string>();
    }
    for (const auto& t : j.value("crash_triggers", json::array())) {
        app.crash_triggers.insert({t.at("screen").get<std::string>(), t.value("widget", ""),
                                   kinematics::gesture_from_name(t.at("gesture").get<std::string>())});
    }
    app.validate();
    return app;
}

void AppModel::save_json(const std::string& path) const {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = name;
    j["initial_screen"] = initial_screen;
    json screens_j = json::array();
    for (const auto& [sname, screen] : screens) {
        json s;
        s["name"] = sname;
        s["background"] = screen.background;
        json widgets = json::array();
        for (const auto& w : screen.widgets) {
            json wj;
            wj["id"] = w.id;
            wj["kind"] = w.kind == vision::WidgetKind::Text ? "text" : "nontext";
            wj["bounds"] = rect_to_json(w.bounds);
            if (!w.text.empty()) wj["text"] = w.text;
            if (w.kind == vision::WidgetKind::Text) wj["scale"] = w.text_scale;
            wj["clickable"] = w.clickable;
            if (w.input) wj["input"] = true;
            wj["style"] = w.style == WidgetStyle::Filled ? "filled"
                          : w.style == WidgetStyle::Field ? "field"
                                                          : "outline";
            widgets.push_back(wj);
        }
        s["widgets"] = widgets;
        screens_j.push_back(s);
    }
    j["screens"] = screens_j;
    json transitions_j = json::array();
    for (const auto& [key, to] : transitions)
        transitions_j.push_back({{"screen", key.screen},
                                 {"widget", key.widget},
                                 {"gesture", kinematics::gesture_name(key.gesture)},
                                 {"to", to}});
    j["transitions"] = transitions_j;
    json crashes_j = json::array();
    for (const auto& key : crash_triggers)
        crashes_j.push_back({{"screen", key.screen},
                             {"widget", key.widget},
                             {"gesture", kinematics::gesture_name(key.gesture)}});
    j["crash_triggers"] = crashes_j;
    write_json_file(j, path);
}

SoftKeyboard SoftKeyboard::layout_for(const DeviceProfile& device) {
    return layout_for_size(device.res_x, device.res_y);
}

SoftKeyboard SoftKeyboard::layout_for_size(int res_x, int res_y) {
    SoftKeyboard kb;
    const std::string rows[3] = {"QWERTYUIOP", "ASDFGHJKL", "ZXCVBNM"};
    int top = static_cast<int>(res_y * 0.62);
    int region_h = res_y - top;
    int row_h = region_h / 4;
    int pitch = res_x / 10;
    for (int r = 0; r < 3; ++r) {
        int n = static_cast<int>(rows[r].size());
        int x0 = (res_x - n * pitch) / 2;
        for (int i = 0; i < n; ++i) {
            Rect key{x0 + i * pitch + 2, top + r * row_h + 2, pitch - 4, row_h - 4};
            kb.keys[rows[r][i]] = key;
        }
    }
    int space_w = pitch * 5;
    kb.keys[' '] = {(res_x - space_w) / 2, top + 3 * row_h + 2, space_w, row_h - 4};
    kb.visible = true;
    return kb;
}

std::map<char, Vec2> SoftKeyboard::key_centers() const {
    std::map<char, Vec2> out;
    for (const auto& [c, r] : keys) out[c] = r.center();
    return out;
}

RenderResult render_screen(const AppModel& app, const std::string& screen_name,
                           const DeviceProfile& device, const SoftKeyboard* keyboard) {
    auto it = app.screens.find(screen_name);
    if (it == app.screens.end())
        raise(ErrorCode::UnknownScreen, "app '" + app.name + "' has no screen '" + screen_name + "'");
    const ScreenDef& screen = it->second;

    RenderResult out;
    out.image = Image::make(device.res_x, device.res_y, 1, screen.background);
    out.ground_truth = screen.widgets;

    constexpr uint8_t kBorderInk = 60;
    constexpr uint8_t kTextInk = 40;
    for (const auto& w : screen.widgets) {
        switch (w.style) {
            case WidgetStyle::Filled:
                if (w.kind == vision::WidgetKind::NonText) fill_rect(out.image, w.bounds, kBorderInk);
                break;
            case WidgetStyle::Field:
            case WidgetStyle::Outline:
                if (w.kind == vision::WidgetKind::NonText)
                    draw_rect_outline(out.image, w.bounds, 2, kBorderInk);
                break;
        }
        if (w.kind == vision::WidgetKind::Text && !w.text.empty())
            vision::draw_text(out.image, w.bounds.x, w.bounds.y, w.text, w.text_scale, kTextInk);
    }

    if (keyboard && keyboard->visible) {
        int top = device.res_y;
        for (const auto& [c, r] : keyboard->keys) top = std::min(top, r.y - 2);
        fill_rect(out.image, {0, top, device.res_x, device.res_y - top}, 215);
        for (const auto& [c, r] : keyboard->keys) {
            draw_rect_outline(out.image, r, 1, kBorderInk);
            if (c != ' ') {
                int tw = vision::text_width_px(std::string(1, c), 2);
                int th = vision::text_height_px(2);
                vision::draw_text(out.image, r.x + (r.w - tw) / 2, r.y + (r.h - th) / 2,
                                  std::string(1, c), 2, kTextInk);
            }
        }
    }

    // The hardware cutout occludes everything it overlaps; the ground truth
    // keeps the widget so oracles can see what was hidden.
    for (const auto& m : device.mask) {
        if (m.kind == MaskShape::Kind::Rect) {
            fill_rect(out.image, m.bounds, 0);
        } else {
            fill_ellipse(out.image, m.bounds.x + m.bounds.w / 2.0, m.bounds.y + m.bounds.h / 2.0,
                         m.bounds.w / 2.0, m.bounds.h / 2.0, 0);
        }
    }
    return out;
}

PhotoResult synthesize_photo(const Image& screen_img, const DeviceProfile& device,
                             const CameraRig& rig, const SceneConfig& scene) {
    // screen px -> world mm (planar similarity from the placement pose).
    double mpp = device.mm_per_px();
    double c = std::cos(device.placement_deflection_rad);
    double s = std::sin(device.placement_deflection_rad);
    Eigen::Matrix3d A1;
    A1 << c * mpp, -s * mpp, device.placement_origin_mm.x, s * mpp, c * mpp,
        device.placement_origin_mm.y, 0, 0, 1;

    // world plane (z=0) -> ideal pixel.
    Eigen::Matrix3d K;
    K << rig.intrinsics.fx, rig.intrinsics.s, rig.intrinsics.cx, 0, rig.intrinsics.fy,
        rig.intrinsics.cy, 0, 0, 1;
    Eigen::Matrix3d RT;
    RT.col(0) = rig.pose.R.col(0);
    RT.col(1) = rig.pose.R.col(1);
    RT.col(2) = rig.pose.t;
    Eigen::Matrix3d H = K * RT * A1;
    Eigen::Matrix3d Hinv = H.inverse();

    PhotoResult out;
    auto project_corner = [&](double px, double py) {
        Vec2 world{0, 0};
        Eigen::Vector3d v = A1 * Eigen::Vector3d(px, py, 1.0);
        world = {v.x(), v.y()};
        return camera::project(rig.intrinsics, rig.pose, {world.x, world.y, 0.0});
    };
    out.true_corners = {project_corner(0, 0),
                        project_corner(screen_img.width, 0),
                        project_corner(screen_img.width, screen_img.height),
                        project_corner(0, screen_img.height)};
    for (const auto& corner : out.true_corners) {
        if (corner.x < 0 || corner.y < 0 || corner.x >= scene.photo_w || corner.y >= scene.photo_h)
            raise(ErrorCode::DeviceOutOfFrame, "screen corner outside the photo");
    }

    Image photo = Image::make(scene.photo_w, scene.photo_h, 1, scene.background_level);

    // Only pixels inside the projected quad's bounding box need warping.
    double min_x = 1e18, max_x = -1e18, min_y = 1e18, max_y = -1e18;
    for (const auto& corner : out.true_corners) {
        min_x = std::min(min_x, corner.x);
        max_x = std::max(max_x, corner.x);
        min_y = std::min(min_y, corner.y);
        max_y = std::max(max_y, corner.y);
    }
    int x0 = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
    int x1 = std::min(scene.photo_w - 1, static_cast<int>(std::ceil(max_x)) + 1);
    int y0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
    int y1 = std::min(scene.photo_h - 1, static_cast<int>(std::ceil(max_y)) + 1);

    bool undistort = rig.intrinsics.k1 != 0.0;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double ux = x + 0.5, uy = y + 0.5;
            if (undistort) {
                // Map the distorted pixel back to the ideal projection.
                double yn = (uy - rig.intrinsics.cy) / rig.intrinsics.fy;
                double xn = (ux - rig.intrinsics.cx - rig.intrinsics.s * yn) / rig.intrinsics.fx;
                double xd = xn, yd = yn;
                for (int i = 0; i < 8; ++i) {
                    double r2 = xn * xn + yn * yn;
                    double f = 1.0 + rig.intrinsics.k1 * r2;
                    xn = xd / f;
                    yn = yd / f;
                }
                ux = rig.intrinsics.fx * xn + rig.intrinsics.s * yn + rig.intrinsics.cx;
                uy = rig.intrinsics.fy * yn + rig.intrinsics.cy;
            }
            Eigen::Vector3d sp = Hinv * Eigen::Vector3d(ux, uy, 1.0);
            if (std::abs(sp.z()) < 1e-12) continue;
            double sx = sp.x() / sp.z(), sy = sp.y() / sp.z();
            if (sx < 0 || sy < 0 || sx > screen_img.width || sy > screen_img.height) continue;
            bool inside = false;
            double v = screen_img.bilinear(sx - 0.5, sy - 0.5, 0, inside);
            if (x == 789 && y == 360) std::fprintf(stderr, "DBG x=789 sx=%.9f v=%.3f inside=%d\n", sx, v, (int)inside);
            if (inside) photo.at(x, y) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }

    // Illumination ramp and sensor noise.
    if (scene.illumination_gradient != 0.0 || scene.noise_sigma > 0.0) {
        Rng rng(Rng::mix(scene.noise_seed, 0x70686f746fULL));
        for (int y = 0; y < photo.height; ++y) {
            for (int x = 0; x < photo.width; ++x) {
                double v = photo.at(x, y);
                if (scene.illumination_gradient != 0.0) {
                    double ramp = 1.0 + scene.illumination_gradient *
                                            (static_cast<double>(x) / photo.width - 0.5);
                    v *= ramp;
                }
                if (scene.noise_sigma > 0.0) v += rng.normal(0.0, scene.noise_sigma);
                photo.at(x, y) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    out.photo = std::move(photo);
    return out;
}

const ModelWidget* resolve_widget(const ScreenDef& screen, const Vec2& device_px) {
    // Later widgets draw on top, so the last hit wins.
    const ModelWidget* hit = nullptr;
    for (const auto& w : screen.widgets)
        if (w.bounds.contains(device_px)) hit = &w;
    return hit;
}

Response apply_operation(const AppModel& app, const std::string& current,
                         const DeviceProfile& device, const kinematics::CompoundGesture& gesture) {
    auto sit = app.screens.find(current);
    if (sit == app.screens.end()) raise(ErrorCode::UnknownScreen, "no screen '" + current + "'");
    const ScreenDef& screen = sit->second;

    using kinematics::GestureKind;
    Vec2 point{device.res_x / 2.0, device.res_y / 2.0}; // scroll anchors on the screen itself
    if (!gesture.targets.empty()) point = gesture.targets.front();

    // Touches inside the hardware cutout never register.
    if (device.in_mask(point)) return {Response::Kind::None, std::nullopt};

    std::string widget_id;
    if (gesture.kind != GestureKind::Scroll) {
        const ModelWidget* w = resolve_widget(screen, point);
        if (!w) return {Response::Kind::None, std::nullopt};
        if (gesture.kind == GestureKind::Input && !w->input)
            return {Response::Kind::None, std::nullopt};
        widget_id = w->id;
    }

    TransitionKey key{current, widget_id, gesture.kind};
    if (app.crash_triggers.count(key)) return {Response::Kind::Crash, std::nullopt};
    auto tit = app.transitions.find(key);
    if (tit != app.transitions.end()) return {Response::Kind::Transition, tit->second};
    return {Response::Kind::None, std::nullopt};
}

AppSession::AppSession(AppModel model, DeviceProfile device)
    : model_(std::move(model)), device_(std::move(device)), current_(model_.initial_screen) {
    model_.validate();
    device_.validate();
}

const std::string& AppSession::field_text(const std::string& widget_id) const {
    static const std::string empty;
    auto it = field_text_.find(widget_id);
    return it == field_text_.end() ? empty : it->second;
}

void AppSession::reset() {
    current_ = model_.initial_screen;
    keyboard_.visible = false;
    focused_field_.clear();
}

void AppSession::set_screen(const std::string& screen) {
    if (!model_.screens.count(screen)) raise(ErrorCode::UnknownScreen, "no screen '" + screen + "'");
    current_ = screen;
    keyboard_.visible = false;
}

void AppSession::show_keyboard(bool visible) {
    if (visible)
        keyboard_ = SoftKeyboard::layout_for(device_);
    else
        keyboard_.visible = false;
}

Response AppSession::apply(const kinematics::CompoundGesture& gesture) {
    using kinematics::GestureKind;

    // Clicks on visible keyboard keys type into the focused field.
    if (keyboard_.visible && gesture.kind == GestureKind::Click && !gesture.targets.empty()) {
        const Vec2& p = gesture.targets.front();
        if (!device_.in_mask(p)) {
            for (const auto& [c, r] : keyboard_.keys) {
                if (r.contains(p)) {
                    if (!focused_field_.empty()) field_text_[focused_field_] += c;
                    return {Response::Kind::None, std::nullopt};
                }
            }
        }
    }

    Response resp = apply_operation(model_, current_, device_, gesture);

    if (gesture.kind == GestureKind::Input && !gesture.targets.empty() &&
        !device_.in_mask(gesture.targets.front())) {
        const ModelWidget* w = resolve_widget(model_.screens.at(current_), gesture.targets.front());
        if (w && w->input) {
            focused_field_ = w->id;
            field_text_[w->id] += gesture.payload;
        }
    }

    if (resp.kind == Response::Kind::Transition) {
        current_ = *resp.next_screen;
        keyboard_.visible = false;
        focused_field_.clear();
    }
    return resp;
}

RenderResult AppSession::render() const {
    return render_screen(model_, current_, device_, keyboard_.visible ? &keyboard_ : nullptr);
}

PhotoResult AppSession::photograph(const CameraRig& rig, const SceneConfig& scene,
                                   uint64_t photo_seed) const {
    SceneConfig seeded = scene;
    seeded.noise_seed = photo_seed;
    return synthesize_photo(render().image, device_, rig, seeded);
}

} // namespace robotest::simbench
